#pragma once

#include <cstdint>
#include <vector>

namespace banipa::rng {

// SplitMix64. Chosen over std::shuffle / std::uniform_* because those are
// implementation-defined; this sequence is identical on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n) via 128-bit multiply-shift.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// Fisher-Yates with the deterministic generator above.
template <typename T>
void shuffle(std::vector<T>& v, std::uint64_t seed) {
    SplitMix64 gen(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = gen.bounded(i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace banipa::rng
