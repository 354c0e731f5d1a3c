#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/rng.hpp"
#include "banipa/tensor.hpp"
#include "banipa/vocab.hpp"

namespace banipa::model {

struct ModelConfig {
    std::size_t d_model = 512;
    std::size_t heads = 8;
    std::size_t d_ff = 2560;
    std::size_t enc_layers = 1;
    std::size_t dec_layers = 1;
    std::size_t src_vocab_size = 0;
    std::size_t tgt_vocab_size = 0;
    std::size_t max_len = 64;
    double dropout_rate = 0.1;

    void validate() const {
        if (d_model == 0 || heads == 0 || d_model % heads != 0) {
            throw Error("d_model must be a positive multiple of heads");
        }
        if (d_ff == 0) throw Error("d_ff must be positive");
        if (src_vocab_size == 0 || tgt_vocab_size == 0) {
            throw Error("vocab sizes must be positive");
        }
        if (max_len < 2) throw Error("max_len must be at least 2");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw Error("dropout_rate must lie in [0, 1)");
        }
    }
};

inline std::size_t param_count(const ModelConfig& c) {
    c.validate();
    const std::size_t d = c.d_model, f = c.d_ff;
    const std::size_t attn = 4 * (d * d + d);
    const std::size_t ffn = d * f + f + f * d + d;
    const std::size_t ln = 2 * d;
    const std::size_t enc_layer = attn + ffn + 2 * ln;
    const std::size_t dec_layer = 2 * attn + ffn + 3 * ln;
    return c.src_vocab_size * d + c.tgt_vocab_size * d + c.enc_layers * enc_layer +
           c.dec_layers * dec_layer + d * c.tgt_vocab_size + c.tgt_vocab_size;
}

template <typename T>
Tensor<T> positional_encoding(std::size_t max_len, std::size_t d_model) {
    if (d_model % 2 != 0) throw Error("positional encoding needs even d_model");
    Tensor<T> pe({max_len, d_model});
    for (std::size_t pos = 0; pos < max_len; pos++) {
        for (std::size_t i = 0; i < d_model / 2; i++) {
            double angle = static_cast<double>(pos) *
                           std::pow(10000.0, -2.0 * static_cast<double>(i) /
                                                 static_cast<double>(d_model));
            pe(pos, 2 * i) = static_cast<T>(std::sin(angle));
            pe(pos, 2 * i + 1) = static_cast<T>(std::cos(angle));
        }
    }
    return pe;
}

template <typename T>
struct AttentionParams {
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct FfnParams {
    Tensor<T> w1, b1, w2, b2;
};

template <typename T>
struct LayerNormParams {
    Tensor<T> gamma, beta;
};

template <typename T>
struct EncoderLayerParams {
    AttentionParams<T> self;
    FfnParams<T> ffn;
    LayerNormParams<T> ln1, ln2;
};

template <typename T>
struct DecoderLayerParams {
    AttentionParams<T> self, cross;
    FfnParams<T> ffn;
    LayerNormParams<T> ln1, ln2, ln3;
};

template <typename T>
struct ModelParams {
    ModelConfig config;
    Tensor<T> src_embedding, tgt_embedding;
    std::vector<EncoderLayerParams<T>> enc;
    std::vector<DecoderLayerParams<T>> dec;
    Tensor<T> out_w, out_b;

    // Zero-valued parameter set with the right shapes; also the gradient holder.
    static ModelParams make(const ModelConfig& c) {
        c.validate();
        ModelParams p;
        p.config = c;
        const std::size_t d = c.d_model, f = c.d_ff;
        auto attn = [&] {
            AttentionParams<T> a;
            for (Tensor<T>* w : {&a.wq, &a.wk, &a.wv, &a.wo}) *w = Tensor<T>({d, d});
            for (Tensor<T>* b : {&a.bq, &a.bk, &a.bv, &a.bo}) *b = Tensor<T>({d});
            return a;
        };
        auto ln = [&] { return LayerNormParams<T>{Tensor<T>({d}), Tensor<T>({d})}; };
        p.src_embedding = Tensor<T>({c.src_vocab_size, d});
        p.tgt_embedding = Tensor<T>({c.tgt_vocab_size, d});
        for (std::size_t i = 0; i < c.enc_layers; i++) {
            EncoderLayerParams<T> layer;
            layer.self = attn();
            layer.ffn = {Tensor<T>({d, f}), Tensor<T>({f}), Tensor<T>({f, d}), Tensor<T>({d})};
            layer.ln1 = ln();
            layer.ln2 = ln();
            p.enc.push_back(std::move(layer));
        }
        for (std::size_t i = 0; i < c.dec_layers; i++) {
            DecoderLayerParams<T> layer;
            layer.self = attn();
            layer.cross = attn();
            layer.ffn = {Tensor<T>({d, f}), Tensor<T>({f}), Tensor<T>({f, d}), Tensor<T>({d})};
            layer.ln1 = ln();
            layer.ln2 = ln();
            layer.ln3 = ln();
            p.dec.push_back(std::move(layer));
        }
        p.out_w = Tensor<T>({d, c.tgt_vocab_size});
        p.out_b = Tensor<T>({c.tgt_vocab_size});
        return p;
    }

    template <typename Self, typename Fn>
    static void traverse(Self& self, Fn&& fn) {
        auto attn = [&fn](const std::string& prefix, auto& a) {
            fn(prefix + ".wq", a.wq);
            fn(prefix + ".bq", a.bq);
            fn(prefix + ".wk", a.wk);
            fn(prefix + ".bk", a.bk);
            fn(prefix + ".wv", a.wv);
            fn(prefix + ".bv", a.bv);
            fn(prefix + ".wo", a.wo);
            fn(prefix + ".bo", a.bo);
        };
        auto ffn = [&fn](const std::string& prefix, auto& f) {
            fn(prefix + ".w1", f.w1);
            fn(prefix + ".b1", f.b1);
            fn(prefix + ".w2", f.w2);
            fn(prefix + ".b2", f.b2);
        };
        auto ln = [&fn](const std::string& prefix, auto& l) {
            fn(prefix + ".gamma", l.gamma);
            fn(prefix + ".beta", l.beta);
        };
        fn("src_embedding", self.src_embedding);
        fn("tgt_embedding", self.tgt_embedding);
        for (std::size_t i = 0; i < self.enc.size(); i++) {
            const std::string p = "enc" + std::to_string(i);
            attn(p + ".self", self.enc[i].self);
            ffn(p + ".ffn", self.enc[i].ffn);
            ln(p + ".ln1", self.enc[i].ln1);
            ln(p + ".ln2", self.enc[i].ln2);
        }
        for (std::size_t i = 0; i < self.dec.size(); i++) {
            const std::string p = "dec" + std::to_string(i);
            attn(p + ".self", self.dec[i].self);
            attn(p + ".cross", self.dec[i].cross);
            ffn(p + ".ffn", self.dec[i].ffn);
            ln(p + ".ln1", self.dec[i].ln1);
            ln(p + ".ln2", self.dec[i].ln2);
            ln(p + ".ln3", self.dec[i].ln3);
        }
        fn("out_proj.w", self.out_w);
        fn("out_proj.b", self.out_b);
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        traverse(*this, fn);
    }
    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        traverse(*this, fn);
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for_each_tensor([&](const std::string&, const Tensor<T>& t) { n += t.numel(); });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_tensor([&](const std::string&, const Tensor<T>& t) { ok = ok && t.all_finite(); });
        return ok;
    }
};

// Glorot-uniform matrices, zero biases, identity layer norms; deterministic in
// traversal order under the seed.
template <typename T>
ModelParams<T> init_params(const ModelConfig& c, std::uint64_t seed) {
    ModelParams<T> p = ModelParams<T>::make(c);
    rng::SplitMix64 gen(seed);
    p.for_each_tensor([&](const std::string& name, Tensor<T>& t) {
        if (t.rank() == 2) {
            double bound = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
            for (std::size_t i = 0; i < t.numel(); i++) {
                t.data()[i] = static_cast<T>((gen.unit() * 2.0 - 1.0) * bound);
            }
        } else if (name.ends_with(".gamma")) {
            t.fill(T{1});
        }
    });
    return p;
}

namespace detail {

// y += x W; x viewed as flat rows of w's input width.
template <typename T>
void matmul_accum(const Tensor<T>& x, const Tensor<T>& w, Tensor<T>& y) {
    const std::size_t rows = x.flat_rows(), in = w.dim(0), out = w.dim(1);
    for (std::size_t r = 0; r < rows; r++) {
        auto xr = x.flat_row(r);
        auto yr = y.flat_row(r);
        for (std::size_t i = 0; i < in; i++) {
            const T xv = xr[i];
            if (xv == T{}) continue;
            auto wr = w.row(i);
            for (std::size_t j = 0; j < out; j++) yr[j] += xv * wr[j];
        }
    }
}

template <typename T>
void linear_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
    const std::size_t rows = x.flat_rows(), out = w.dim(1);
    for (std::size_t r = 0; r < rows; r++) {
        auto yr = y.flat_row(r);
        for (std::size_t j = 0; j < out; j++) yr[j] = b(j);
    }
    matmul_accum(x, w, y);
}

// Accumulates dx, dw, db for y = x W + b given dy.
template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>& dx,
                     Tensor<T>& dw, Tensor<T>& db) {
    const std::size_t rows = x.flat_rows(), in = w.dim(0), out = w.dim(1);
    for (std::size_t r = 0; r < rows; r++) {
        auto xr = x.flat_row(r);
        auto dyr = dy.flat_row(r);
        auto dxr = dx.flat_row(r);
        for (std::size_t j = 0; j < out; j++) db(j) += dyr[j];
        for (std::size_t i = 0; i < in; i++) {
            auto wr = w.row(i);
            auto dwr = dw.row(i);
            T acc{};
            const T xv = xr[i];
            for (std::size_t j = 0; j < out; j++) {
                acc += dyr[j] * wr[j];
                dwr[j] += xv * dyr[j];
            }
            dxr[i] += acc;
        }
    }
}

// Softmax over the positions `allowed` lets through; blocked entries end as 0.
template <typename T, typename Allowed>
void masked_softmax(std::span<T> row, Allowed&& allowed) {
    T best{};
    bool any = false;
    for (std::size_t j = 0; j < row.size(); j++) {
        if (allowed(j) && (!any || row[j] > best)) {
            best = row[j];
            any = true;
        }
    }
    if (!any) throw Error("attention row with every position masked");
    T total{};
    for (std::size_t j = 0; j < row.size(); j++) {
        if (allowed(j)) {
            row[j] = std::exp(row[j] - best);
            total += row[j];
        } else {
            row[j] = T{};
        }
    }
    for (std::size_t j = 0; j < row.size(); j++) row[j] /= total;
}

}  // namespace detail

// Plain single-matrix attention; mask nonzero = position blocked.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const Tensor<std::uint8_t>* mask = nullptr,
                               Tensor<T>* probs_out = nullptr) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
        k.dim(0) != v.dim(0)) {
        throw Error("attention operand shapes disagree");
    }
    const std::size_t n = q.dim(0), m = k.dim(0), dk = q.dim(1), dv = v.dim(1);
    if (mask && (mask->rank() != 2 || mask->dim(0) != n || mask->dim(1) != m)) {
        throw Error("attention mask shape disagrees with scores");
    }
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
    Tensor<T> probs({n, m});
    Tensor<T> out({n, dv});
    for (std::size_t i = 0; i < n; i++) {
        auto pr = probs.row(i);
        for (std::size_t j = 0; j < m; j++) {
            T dot{};
            for (std::size_t c = 0; c < dk; c++) dot += q(i, c) * k(j, c);
            pr[j] = dot * scale;
        }
        detail::masked_softmax(pr, [&](std::size_t j) { return !mask || (*mask)(i, j) == 0; });
        auto orow = out.row(i);
        for (std::size_t j = 0; j < m; j++) {
            if (pr[j] == T{}) continue;
            for (std::size_t c = 0; c < dv; c++) orow[c] += pr[j] * v(j, c);
        }
    }
    if (probs_out) *probs_out = std::move(probs);
    return out;
}

enum class MaskKind { None, KeyLens, Causal };

struct MaskSpec {
    MaskKind kind = MaskKind::None;
    const std::vector<std::size_t>* key_lens = nullptr;
};

template <typename T>
struct AttnCache {
    Tensor<T> x_q, x_kv;
    Tensor<T> q, k, v;
    Tensor<T> probs;   // [batch, heads, q_len, k_len]
    Tensor<T> concat;  // head outputs reassembled, input to the output projection
};

template <typename T>
struct LnCache {
    Tensor<T> xhat;
    std::vector<T> inv_std;
};

template <typename T>
struct FfnCache {
    Tensor<T> x;
    Tensor<T> h;  // post-relu hidden activations
};

template <typename T>
struct DropCache {
    bool active = false;
    T keep{1};
    Tensor<std::uint8_t> mask;
};

template <typename T>
struct EncLayerCache {
    AttnCache<T> self;
    DropCache<T> drop1;
    LnCache<T> ln1;
    FfnCache<T> ffn;
    DropCache<T> drop2;
    LnCache<T> ln2;
};

template <typename T>
struct DecLayerCache {
    AttnCache<T> self;
    DropCache<T> drop1;
    LnCache<T> ln1;
    AttnCache<T> cross;
    DropCache<T> drop2;
    LnCache<T> ln2;
    FfnCache<T> ffn;
    DropCache<T> drop3;
    LnCache<T> ln3;
};

template <typename T>
struct ForwardCache {
    std::vector<std::vector<vocab::Id>> src_ids, tgt_ids;
    std::vector<std::size_t> src_lens;
    DropCache<T> src_drop, tgt_drop;
    std::vector<EncLayerCache<T>> enc;
    Tensor<T> enc_out;
    std::vector<DecLayerCache<T>> dec;
    Tensor<T> dec_out;
};

namespace detail {

template <typename T>
void dropout_forward(Tensor<T>& x, double rate, bool training, rng::SplitMix64* gen,
                     DropCache<T>& cache) {
    if (!training || rate <= 0.0) {
        cache.active = false;
        return;
    }
    if (!gen) throw Error("training-mode dropout needs a generator");
    cache.active = true;
    cache.keep = static_cast<T>(1.0 - rate);
    cache.mask = Tensor<std::uint8_t>(x.shape());
    for (std::size_t i = 0; i < x.numel(); i++) {
        bool kept = gen->unit() >= rate;
        cache.mask.data()[i] = kept ? 1 : 0;
        x.data()[i] = kept ? x.data()[i] / cache.keep : T{};
    }
}

template <typename T>
void dropout_backward(const DropCache<T>& cache, Tensor<T>& d) {
    if (!cache.active) return;
    for (std::size_t i = 0; i < d.numel(); i++) {
        d.data()[i] = cache.mask.data()[i] ? d.data()[i] / cache.keep : T{};
    }
}

inline constexpr double kLayerNormEpsilon = 1e-5;

template <typename T>
void layernorm_forward(const Tensor<T>& x, const LayerNormParams<T>& p, LnCache<T>& cache,
                       Tensor<T>& y) {
    const std::size_t rows = x.flat_rows(), d = x.last_dim();
    cache.xhat = Tensor<T>(x.shape());
    cache.inv_std.assign(rows, T{});
    for (std::size_t r = 0; r < rows; r++) {
        auto xr = x.flat_row(r);
        T mean{};
        for (T v : xr) mean += v;
        mean /= static_cast<T>(d);
        T var{};
        for (T v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<T>(d);
        const T inv = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEpsilon));
        cache.inv_std[r] = inv;
        auto hr = cache.xhat.flat_row(r);
        auto yr = y.flat_row(r);
        for (std::size_t i = 0; i < d; i++) {
            hr[i] = (xr[i] - mean) * inv;
            yr[i] = p.gamma(i) * hr[i] + p.beta(i);
        }
    }
}

template <typename T>
void layernorm_backward(const LayerNormParams<T>& p, const LnCache<T>& cache, const Tensor<T>& dy,
                        Tensor<T>& dx, LayerNormParams<T>& grads) {
    const std::size_t rows = dy.flat_rows(), d = dy.last_dim();
    for (std::size_t r = 0; r < rows; r++) {
        auto dyr = dy.flat_row(r);
        auto hr = cache.xhat.flat_row(r);
        auto dxr = dx.flat_row(r);
        T mean_dxhat{}, mean_dxhat_xhat{};
        for (std::size_t i = 0; i < d; i++) {
            grads.gamma(i) += dyr[i] * hr[i];
            grads.beta(i) += dyr[i];
            const T dxhat = dyr[i] * p.gamma(i);
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * hr[i];
        }
        mean_dxhat /= static_cast<T>(d);
        mean_dxhat_xhat /= static_cast<T>(d);
        const T inv = cache.inv_std[r];
        for (std::size_t i = 0; i < d; i++) {
            const T dxhat = dyr[i] * p.gamma(i);
            dxr[i] += inv * (dxhat - mean_dxhat - hr[i] * mean_dxhat_xhat);
        }
    }
}

template <typename T>
void mha_forward(const Tensor<T>& x_q, const Tensor<T>& x_kv, const AttentionParams<T>& p,
                 std::size_t heads, const MaskSpec& mask, AttnCache<T>& cache, Tensor<T>& out) {
    const std::size_t b = x_q.dim(0), lq = x_q.dim(1), lk = x_kv.dim(1), d = x_q.dim(2);
    const std::size_t dk = d / heads;
    cache.x_q = x_q;
    cache.x_kv = x_kv;
    cache.q = Tensor<T>({b, lq, d});
    cache.k = Tensor<T>({b, lk, d});
    cache.v = Tensor<T>({b, lk, d});
    linear_forward(x_q, p.wq, p.bq, cache.q);
    linear_forward(x_kv, p.wk, p.bk, cache.k);
    linear_forward(x_kv, p.wv, p.bv, cache.v);
    cache.probs = Tensor<T>({b, heads, lq, lk});
    cache.concat = Tensor<T>({b, lq, d});
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
    for (std::size_t bi = 0; bi < b; bi++) {
        for (std::size_t h = 0; h < heads; h++) {
            const std::size_t off = h * dk;
            for (std::size_t i = 0; i < lq; i++) {
                auto qr = cache.q.row(bi, i);
                auto pr = cache.probs.row(bi, h, i);
                for (std::size_t j = 0; j < lk; j++) {
                    auto kr = cache.k.row(bi, j);
                    T dot{};
                    for (std::size_t c = 0; c < dk; c++) dot += qr[off + c] * kr[off + c];
                    pr[j] = dot * scale;
                }
                auto allowed = [&](std::size_t j) {
                    switch (mask.kind) {
                        case MaskKind::None: return true;
                        case MaskKind::KeyLens: return j < (*mask.key_lens)[bi];
                        case MaskKind::Causal: return j <= i;
                    }
                    return true;
                };
                masked_softmax(pr, allowed);
                auto cr = cache.concat.row(bi, i);
                for (std::size_t j = 0; j < lk; j++) {
                    if (pr[j] == T{}) continue;
                    auto vr = cache.v.row(bi, j);
                    for (std::size_t c = 0; c < dk; c++) cr[off + c] += pr[j] * vr[off + c];
                }
            }
        }
    }
    linear_forward(cache.concat, p.wo, p.bo, out);
}

// Accumulates into dx_q/dx_kv (pass the same tensor twice for self-attention)
// and into grads. Blocked probabilities are exact zeros, so no mask is needed.
template <typename T>
void mha_backward(const AttentionParams<T>& p, std::size_t heads, const AttnCache<T>& cache,
                  const Tensor<T>& dout, Tensor<T>& dx_q, Tensor<T>& dx_kv,
                  AttentionParams<T>& grads) {
    const std::size_t b = cache.x_q.dim(0), lq = cache.x_q.dim(1), lk = cache.x_kv.dim(1),
                      d = cache.x_q.dim(2);
    const std::size_t dk = d / heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
    Tensor<T> dconcat(cache.concat.shape());
    linear_backward(cache.concat, p.wo, dout, dconcat, grads.wo, grads.bo);
    Tensor<T> dq(cache.q.shape()), dkk(cache.k.shape()), dv(cache.v.shape());
    std::vector<T> dprob(lk), dscore(lk);
    for (std::size_t bi = 0; bi < b; bi++) {
        for (std::size_t h = 0; h < heads; h++) {
            const std::size_t off = h * dk;
            for (std::size_t i = 0; i < lq; i++) {
                auto pr = cache.probs.row(bi, h, i);
                auto dcr = dconcat.row(bi, i);
                T dot_p_dp{};
                for (std::size_t j = 0; j < lk; j++) {
                    if (pr[j] == T{}) {
                        dprob[j] = T{};
                        continue;
                    }
                    auto vr = cache.v.row(bi, j);
                    auto dvr = dv.row(bi, j);
                    T acc{};
                    for (std::size_t c = 0; c < dk; c++) {
                        acc += dcr[off + c] * vr[off + c];
                        dvr[off + c] += pr[j] * dcr[off + c];
                    }
                    dprob[j] = acc;
                    dot_p_dp += pr[j] * acc;
                }
                auto qr = cache.q.row(bi, i);
                auto dqr = dq.row(bi, i);
                for (std::size_t j = 0; j < lk; j++) {
                    dscore[j] = pr[j] * (dprob[j] - dot_p_dp);
                    if (dscore[j] == T{}) continue;
                    auto kr = cache.k.row(bi, j);
                    auto dkr = dkk.row(bi, j);
                    const T ds = dscore[j] * scale;
                    for (std::size_t c = 0; c < dk; c++) {
                        dqr[off + c] += ds * kr[off + c];
                        dkr[off + c] += ds * qr[off + c];
                    }
                }
            }
        }
    }
    linear_backward(cache.x_q, p.wq, dq, dx_q, grads.wq, grads.bq);
    linear_backward(cache.x_kv, p.wk, dkk, dx_kv, grads.wk, grads.bk);
    linear_backward(cache.x_kv, p.wv, dv, dx_kv, grads.wv, grads.bv);
}

template <typename T>
void ffn_forward(const Tensor<T>& x, const FfnParams<T>& p, FfnCache<T>& cache, Tensor<T>& y) {
    const std::size_t b = x.dim(0), l = x.dim(1), f = p.w1.dim(1);
    cache.x = x;
    cache.h = Tensor<T>({b, l, f});
    linear_forward(x, p.w1, p.b1, cache.h);
    for (std::size_t i = 0; i < cache.h.numel(); i++) {
        if (cache.h.data()[i] < T{}) cache.h.data()[i] = T{};
    }
    linear_forward(cache.h, p.w2, p.b2, y);
}

template <typename T>
void ffn_backward(const FfnParams<T>& p, const FfnCache<T>& cache, const Tensor<T>& dy,
                  Tensor<T>& dx, FfnParams<T>& grads) {
    Tensor<T> dh(cache.h.shape());
    linear_backward(cache.h, p.w2, dy, dh, grads.w2, grads.b2);
    for (std::size_t i = 0; i < dh.numel(); i++) {
        if (cache.h.data()[i] == T{}) dh.data()[i] = T{};
    }
    linear_backward(cache.x, p.w1, dh, dx, grads.w1, grads.b1);
}

template <typename T>
void embed_forward(const Tensor<T>& table, const std::vector<std::vector<vocab::Id>>& ids,
                   const Tensor<T>& pe, Tensor<T>& out) {
    const std::size_t b = ids.size(), l = ids[0].size(), d = table.dim(1);
    const T scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
    for (std::size_t bi = 0; bi < b; bi++) {
        for (std::size_t li = 0; li < l; li++) {
            auto er = table.row(ids[bi][li]);
            auto pr = pe.row(li);
            auto orow = out.row(bi, li);
            for (std::size_t c = 0; c < d; c++) orow[c] = er[c] * scale + pr[c];
        }
    }
}

template <typename T>
void embed_backward(const std::vector<std::vector<vocab::Id>>& ids, const Tensor<T>& dout,
                    Tensor<T>& dtable) {
    const std::size_t b = ids.size(), l = ids[0].size(), d = dtable.dim(1);
    const T scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
    for (std::size_t bi = 0; bi < b; bi++) {
        for (std::size_t li = 0; li < l; li++) {
            auto dr = dout.row(bi, li);
            auto tr = dtable.row(ids[bi][li]);
            for (std::size_t c = 0; c < d; c++) tr[c] += dr[c] * scale;
        }
    }
}

inline void check_batch(const std::vector<std::vector<vocab::Id>>& ids, std::size_t vocab_size,
                        std::size_t max_len, const char* which) {
    if (ids.empty()) throw Error(std::string(which) + " batch is empty");
    const std::size_t l = ids[0].size();
    if (l == 0 || l > max_len) {
        throw Error(std::string(which) + " length " + std::to_string(l) +
                    " outside [1, max_len]");
    }
    for (const auto& row : ids) {
        if (row.size() != l) throw Error(std::string(which) + " rows have unequal lengths");
        for (vocab::Id id : row) {
            if (id >= vocab_size) {
                throw Error(std::string(which) + " id " + std::to_string(id) +
                            " outside vocabulary");
            }
        }
    }
}

}  // namespace detail

// Teacher-forced batch forward. Source rows attend only up to their first EOS;
// decoder self-attention is causal. Returns [batch, tgt_len, tgt_vocab] logits.
template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const std::vector<std::vector<vocab::Id>>& src_ids,
                  const std::vector<std::vector<vocab::Id>>& tgt_ids, bool training = false,
                  rng::SplitMix64* dropout_rng = nullptr, ForwardCache<T>* cache_out = nullptr) {
    const ModelConfig& c = params.config;
    detail::check_batch(src_ids, c.src_vocab_size, c.max_len, "source");
    detail::check_batch(tgt_ids, c.tgt_vocab_size, c.max_len, "target");
    if (src_ids.size() != tgt_ids.size()) throw Error("source and target batch sizes differ");
    const std::size_t b = src_ids.size(), s = src_ids[0].size(), t = tgt_ids[0].size(),
                      d = c.d_model;

    ForwardCache<T> local;
    ForwardCache<T>& cache = cache_out ? *cache_out : local;
    cache = ForwardCache<T>{};
    cache.src_ids = src_ids;
    cache.tgt_ids = tgt_ids;
    cache.src_lens.assign(b, s);
    for (std::size_t bi = 0; bi < b; bi++) {
        for (std::size_t li = 0; li < s; li++) {
            if (src_ids[bi][li] == vocab::EOS) {
                cache.src_lens[bi] = li + 1;
                break;
            }
        }
    }

    Tensor<T> pe = positional_encoding<T>(c.max_len, d);
    const MaskSpec src_mask{MaskKind::KeyLens, &cache.src_lens};
    const MaskSpec causal{MaskKind::Causal, nullptr};

    Tensor<T> x({b, s, d});
    detail::embed_forward(params.src_embedding, src_ids, pe, x);
    detail::dropout_forward(x, c.dropout_rate, training, dropout_rng, cache.src_drop);

    cache.enc.resize(c.enc_layers);
    for (std::size_t li = 0; li < c.enc_layers; li++) {
        auto& lp = params.enc[li];
        auto& lc = cache.enc[li];
        Tensor<T> a({b, s, d});
        detail::mha_forward(x, x, lp.self, c.heads, src_mask, lc.self, a);
        detail::dropout_forward(a, c.dropout_rate, training, dropout_rng, lc.drop1);
        for (std::size_t i = 0; i < a.numel(); i++) a.data()[i] += x.data()[i];
        detail::layernorm_forward(a, lp.ln1, lc.ln1, x);
        Tensor<T> f({b, s, d});
        detail::ffn_forward(x, lp.ffn, lc.ffn, f);
        detail::dropout_forward(f, c.dropout_rate, training, dropout_rng, lc.drop2);
        for (std::size_t i = 0; i < f.numel(); i++) f.data()[i] += x.data()[i];
        detail::layernorm_forward(f, lp.ln2, lc.ln2, x);
    }
    cache.enc_out = x;

    Tensor<T> y({b, t, d});
    detail::embed_forward(params.tgt_embedding, tgt_ids, pe, y);
    detail::dropout_forward(y, c.dropout_rate, training, dropout_rng, cache.tgt_drop);

    cache.dec.resize(c.dec_layers);
    for (std::size_t li = 0; li < c.dec_layers; li++) {
        auto& lp = params.dec[li];
        auto& lc = cache.dec[li];
        Tensor<T> a({b, t, d});
        detail::mha_forward(y, y, lp.self, c.heads, causal, lc.self, a);
        detail::dropout_forward(a, c.dropout_rate, training, dropout_rng, lc.drop1);
        for (std::size_t i = 0; i < a.numel(); i++) a.data()[i] += y.data()[i];
        detail::layernorm_forward(a, lp.ln1, lc.ln1, y);
        Tensor<T> cr({b, t, d});
        detail::mha_forward(y, cache.enc_out, lp.cross, c.heads, src_mask, lc.cross, cr);
        detail::dropout_forward(cr, c.dropout_rate, training, dropout_rng, lc.drop2);
        for (std::size_t i = 0; i < cr.numel(); i++) cr.data()[i] += y.data()[i];
        detail::layernorm_forward(cr, lp.ln2, lc.ln2, y);
        Tensor<T> f({b, t, d});
        detail::ffn_forward(y, lp.ffn, lc.ffn, f);
        detail::dropout_forward(f, c.dropout_rate, training, dropout_rng, lc.drop3);
        for (std::size_t i = 0; i < f.numel(); i++) f.data()[i] += y.data()[i];
        detail::layernorm_forward(f, lp.ln3, lc.ln3, y);
    }
    cache.dec_out = y;

    Tensor<T> logits({b, t, c.tgt_vocab_size});
    detail::linear_forward(y, params.out_w, params.out_b, logits);
    return logits;
}

// Gradients of every parameter given d(loss)/d(logits); mirrors forward exactly.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache,
                        const Tensor<T>& dlogits) {
    const ModelConfig& c = params.config;
    ModelParams<T> g = ModelParams<T>::make(c);

    Tensor<T> dy(cache.dec_out.shape());
    detail::linear_backward(cache.dec_out, params.out_w, dlogits, dy, g.out_w, g.out_b);

    Tensor<T> denc_total(cache.enc_out.shape());
    for (std::size_t li = c.dec_layers; li-- > 0;) {
        auto& lp = params.dec[li];
        auto& lg = g.dec[li];
        const auto& lc = cache.dec[li];

        Tensor<T> dsum(dy.shape());
        detail::layernorm_backward(lp.ln3, lc.ln3, dy, dsum, lg.ln3);
        Tensor<T> df = dsum;
        detail::dropout_backward(lc.drop3, df);
        dy = dsum;
        detail::ffn_backward(lp.ffn, lc.ffn, df, dy, lg.ffn);

        dsum = Tensor<T>(dy.shape());
        detail::layernorm_backward(lp.ln2, lc.ln2, dy, dsum, lg.ln2);
        Tensor<T> dcr = dsum;
        detail::dropout_backward(lc.drop2, dcr);
        dy = dsum;
        detail::mha_backward(lp.cross, c.heads, lc.cross, dcr, dy, denc_total, lg.cross);

        dsum = Tensor<T>(dy.shape());
        detail::layernorm_backward(lp.ln1, lc.ln1, dy, dsum, lg.ln1);
        Tensor<T> da = dsum;
        detail::dropout_backward(lc.drop1, da);
        dy = dsum;
        detail::mha_backward(lp.self, c.heads, lc.self, da, dy, dy, lg.self);
    }
    detail::dropout_backward(cache.tgt_drop, dy);
    detail::embed_backward(cache.tgt_ids, dy, g.tgt_embedding);

    Tensor<T> dx = denc_total;
    for (std::size_t li = c.enc_layers; li-- > 0;) {
        auto& lp = params.enc[li];
        auto& lg = g.enc[li];
        const auto& lc = cache.enc[li];

        Tensor<T> dsum(dx.shape());
        detail::layernorm_backward(lp.ln2, lc.ln2, dx, dsum, lg.ln2);
        Tensor<T> df = dsum;
        detail::dropout_backward(lc.drop2, df);
        dx = dsum;
        detail::ffn_backward(lp.ffn, lc.ffn, df, dx, lg.ffn);

        dsum = Tensor<T>(dx.shape());
        detail::layernorm_backward(lp.ln1, lc.ln1, dx, dsum, lg.ln1);
        Tensor<T> da = dsum;
        detail::dropout_backward(lc.drop1, da);
        dx = dsum;
        detail::mha_backward(lp.self, c.heads, lc.self, da, dx, dx, lg.self);
    }
    detail::dropout_backward(cache.src_drop, dx);
    detail::embed_backward(cache.src_ids, dx, g.src_embedding);
    return g;
}

struct DecodeResult {
    std::vector<vocab::Id> ids;  // BOS and the terminating EOS stripped
    bool truncated = false;
};

template <typename T>
DecodeResult greedy_decode(const ModelParams<T>& params, const std::vector<vocab::Id>& src_ids) {
    const ModelConfig& c = params.config;
    // Trim the source at its EOS; masking makes the padded tail irrelevant.
    std::vector<vocab::Id> src = src_ids;
    for (std::size_t i = 0; i < src.size(); i++) {
        if (src[i] == vocab::EOS) {
            src.resize(i + 1);
            break;
        }
    }
    DecodeResult result;
    std::vector<vocab::Id> tgt = {vocab::BOS};
    while (tgt.size() < c.max_len) {
        Tensor<T> logits = forward(params, {src}, {tgt});
        auto last = logits.row(0, tgt.size() - 1);
        std::size_t best = 0;
        for (std::size_t j = 1; j < last.size(); j++) {
            if (last[j] > last[best]) best = j;
        }
        if (best == vocab::EOS) return result;
        result.ids.push_back(static_cast<vocab::Id>(best));
        tgt.push_back(static_cast<vocab::Id>(best));
    }
    result.truncated = true;
    return result;
}

}  // namespace banipa::model
