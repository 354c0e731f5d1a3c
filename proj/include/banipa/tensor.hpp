#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace banipa {

// Dense row-major tensor. Rank is dynamic; element access is by exact-arity
// operator() so a shape mismatch shows up as an assert, not a silent stride bug.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (std::size_t d : shape_) n *= d;
        data_.assign(n, T{});
    }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const {
        assert(i < shape_.size());
        return shape_[i];
    }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator()(std::size_t i) {
        assert(rank() == 1 && i < shape_[0]);
        return data_[i];
    }
    const T& operator()(std::size_t i) const {
        assert(rank() == 1 && i < shape_[0]);
        return data_[i];
    }
    T& operator()(std::size_t i, std::size_t j) {
        assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
        return data_[i * shape_[1] + j];
    }
    const T& operator()(std::size_t i, std::size_t j) const {
        assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
        return data_[i * shape_[1] + j];
    }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        assert(rank() == 4);
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        assert(rank() == 4);
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    std::span<T> row(std::size_t i) {
        assert(rank() == 2 && i < shape_[0]);
        return {data_.data() + i * shape_[1], shape_[1]};
    }
    std::span<const T> row(std::size_t i) const {
        assert(rank() == 2 && i < shape_[0]);
        return {data_.data() + i * shape_[1], shape_[1]};
    }
    std::span<T> row(std::size_t i, std::size_t j) {
        assert(rank() == 3 && i < shape_[0] && j < shape_[1]);
        return {data_.data() + (i * shape_[1] + j) * shape_[2], shape_[2]};
    }
    std::span<const T> row(std::size_t i, std::size_t j) const {
        assert(rank() == 3 && i < shape_[0] && j < shape_[1]);
        return {data_.data() + (i * shape_[1] + j) * shape_[2], shape_[2]};
    }
    std::span<T> row(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 4 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
        return {data_.data() + ((i * shape_[1] + j) * shape_[2] + k) * shape_[3], shape_[3]};
    }
    std::span<const T> row(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 4 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
        return {data_.data() + ((i * shape_[1] + j) * shape_[2] + k) * shape_[3], shape_[3]};
    }

    std::size_t last_dim() const { return shape_.empty() ? 0 : shape_.back(); }
    std::size_t flat_rows() const {
        return shape_.empty() || shape_.back() == 0 ? 0 : numel() / shape_.back();
    }
    // Views the tensor as [flat_rows x last_dim]; handy for rowwise ops.
    std::span<T> flat_row(std::size_t r) {
        assert(r < flat_rows());
        return {data_.data() + r * last_dim(), last_dim()};
    }
    std::span<const T> flat_row(std::size_t r) const {
        assert(r < flat_rows());
        return {data_.data() + r * last_dim(), last_dim()};
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const
        requires std::is_floating_point_v<T>
    {
        for (const T& v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

}  // namespace banipa
