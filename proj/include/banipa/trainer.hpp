#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/corpus.hpp"
#include "banipa/model.hpp"
#include "banipa/rng.hpp"
#include "banipa/tensor.hpp"
#include "banipa/vocab.hpp"

namespace banipa::trainer {

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    double rmsprop_decay = 0.9;
    double rmsprop_epsilon = 1e-7;
    std::uint64_t seed = 0;
    std::size_t max_len = 64;

    void validate() const {
        if (epochs < 1) throw Error("epochs must be at least 1");
        if (batch_size < 1) throw Error("batch_size must be at least 1");
        if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
        if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0)) {
            throw Error("rmsprop_decay must lie in [0, 1)");
        }
        if (!(rmsprop_epsilon > 0.0)) throw Error("rmsprop_epsilon must be positive");
    }
};

struct EpochRecord {
    double train_loss = 0;
    double train_accuracy = 0;
    double val_loss = 0;
    double val_accuracy = 0;
    bool operator==(const EpochRecord&) const = default;
};

using TrainHistory = std::vector<EpochRecord>;

namespace detail {

inline std::size_t count_live_targets(const std::vector<std::vector<vocab::Id>>& targets) {
    std::size_t live = 0;
    for (const auto& row : targets) {
        for (vocab::Id id : row) live += (id != vocab::PAD) ? 1 : 0;
    }
    if (live == 0) throw Error("every target position is PAD");
    return live;
}

}  // namespace detail

// Mean cross-entropy over non-PAD target positions; optionally also writes
// d(loss)/d(logits) in one pass. Accumulation is done in double regardless of T.
template <typename T>
double masked_ce_loss(const Tensor<T>& logits, const std::vector<std::vector<vocab::Id>>& targets,
                      Tensor<T>* dlogits = nullptr) {
    const std::size_t b = logits.dim(0), t = logits.dim(1), v = logits.dim(2);
    if (targets.size() != b) throw Error("target batch size disagrees with logits");
    if (dlogits) {
        *dlogits = Tensor<T>(logits.shape());
    }
    const std::size_t live = detail::count_live_targets(targets);
    double total = 0;
    for (std::size_t bi = 0; bi < b; bi++) {
        if (targets[bi].size() != t) throw Error("target row length disagrees with logits");
        for (std::size_t ti = 0; ti < t; ti++) {
            const vocab::Id y = targets[bi][ti];
            if (y == vocab::PAD) continue;
            if (y >= v) throw Error("target id outside logits vocabulary");
            auto row = logits.row(bi, ti);
            double best = row[0];
            for (std::size_t j = 1; j < v; j++) best = std::max(best, static_cast<double>(row[j]));
            double denom = 0;
            for (std::size_t j = 0; j < v; j++) denom += std::exp(row[j] - best);
            const double lse = best + std::log(denom);
            total += lse - static_cast<double>(row[y]);
            if (dlogits) {
                auto drow = dlogits->row(bi, ti);
                for (std::size_t j = 0; j < v; j++) {
                    double softmax = std::exp(row[j] - best) / denom;
                    double grad = softmax - (j == y ? 1.0 : 0.0);
                    drow[j] = static_cast<T>(grad / static_cast<double>(live));
                }
            }
        }
    }
    return total / static_cast<double>(live);
}

template <typename T>
double masked_accuracy(const Tensor<T>& logits, const std::vector<std::vector<vocab::Id>>& targets) {
    const std::size_t b = logits.dim(0), t = logits.dim(1), v = logits.dim(2);
    if (targets.size() != b) throw Error("target batch size disagrees with logits");
    const std::size_t live = detail::count_live_targets(targets);
    std::size_t correct = 0;
    for (std::size_t bi = 0; bi < b; bi++) {
        if (targets[bi].size() != t) throw Error("target row length disagrees with logits");
        for (std::size_t ti = 0; ti < t; ti++) {
            const vocab::Id y = targets[bi][ti];
            if (y == vocab::PAD) continue;
            auto row = logits.row(bi, ti);
            std::size_t best = 0;
            for (std::size_t j = 1; j < v; j++) {
                if (row[j] > row[best]) best = j;
            }
            correct += (best == y) ? 1 : 0;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(live);
}

template <typename T>
struct OptimizerState {
    std::vector<Tensor<T>> acc;  // squared-gradient accumulators, traversal order

    static OptimizerState make(const model::ModelParams<T>& params) {
        OptimizerState st;
        params.for_each_tensor(
            [&](const std::string&, const Tensor<T>& t) { st.acc.push_back(Tensor<T>(t.shape())); });
        return st;
    }
};

template <typename T>
void rmsprop_step(model::ModelParams<T>& params, const model::ModelParams<T>& grads,
                  OptimizerState<T>& state, const TrainConfig& config) {
    const T decay = static_cast<T>(config.rmsprop_decay);
    const T lr = static_cast<T>(config.learning_rate);
    const T eps = static_cast<T>(config.rmsprop_epsilon);
    std::vector<const Tensor<T>*> grad_tensors;
    grads.for_each_tensor(
        [&](const std::string&, const Tensor<T>& t) { grad_tensors.push_back(&t); });
    std::size_t idx = 0;
    params.for_each_tensor([&](const std::string& name, Tensor<T>& p) {
        const Tensor<T>& g = *grad_tensors[idx];
        Tensor<T>& a = state.acc[idx];
        if (!p.same_shape(g) || !p.same_shape(a)) {
            throw Error("optimizer shape mismatch at " + name);
        }
        for (std::size_t i = 0; i < p.numel(); i++) {
            const T gv = g.data()[i];
            if (!std::isfinite(gv)) throw Error("non-finite gradient in " + name);
            T& av = a.data()[i];
            av = decay * av + (T{1} - decay) * gv * gv;
            p.data()[i] -= lr * gv / (std::sqrt(av) + eps);
        }
        idx++;
    });
}

namespace detail {

template <typename T>
struct EncodedBatch {
    std::vector<std::vector<vocab::Id>> src, dec_in, target;
    std::size_t live_tokens = 0;
};

// Trims every row to the longest live span in the batch; masking and loss
// padding rules make this bit-exact against the untrimmed computation.
inline EncodedBatch<float> assemble_batch(
    const std::vector<std::pair<std::vector<vocab::Id>, std::vector<vocab::Id>>>& encoded,
    const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
    auto live_len = [](const std::vector<vocab::Id>& z) {
        for (std::size_t i = 0; i < z.size(); i++) {
            if (z[i] == vocab::EOS) return i + 1;
        }
        return z.size();
    };
    std::size_t src_len = 0, tgt_len = 0;
    for (std::size_t i = begin; i < end; i++) {
        const auto& [src_z, tgt_z] = encoded[order[i]];
        src_len = std::max(src_len, live_len(src_z));
        tgt_len = std::max(tgt_len, live_len(tgt_z));
    }
    EncodedBatch<float> batch;
    for (std::size_t i = begin; i < end; i++) {
        const auto& [src_z, tgt_z] = encoded[order[i]];
        batch.src.emplace_back(src_z.begin(), src_z.begin() + src_len);
        batch.dec_in.emplace_back(tgt_z.begin(), tgt_z.begin() + (tgt_len - 1));
        batch.target.emplace_back(tgt_z.begin() + 1, tgt_z.begin() + tgt_len);
        batch.live_tokens += live_len(tgt_z) - 1;
    }
    return batch;
}

}  // namespace detail

template <typename T>
std::pair<model::ModelParams<T>, TrainHistory> train(
    const TrainConfig& config, const model::ModelConfig& model_config,
    const std::vector<corpus::WordPair>& train_pairs,
    const std::vector<corpus::WordPair>& val_pairs, const vocab::CharVocab& src_vocab,
    const vocab::CharVocab& tgt_vocab, std::ostream* log = nullptr) {
    config.validate();
    model::ModelConfig mc = model_config;
    mc.src_vocab_size = src_vocab.size();
    mc.tgt_vocab_size = tgt_vocab.size();
    mc.max_len = config.max_len;
    mc.validate();
    if (train_pairs.empty()) throw Error("training set is empty");

    auto encode_all = [&](const std::vector<corpus::WordPair>& pairs) {
        std::vector<std::pair<std::vector<vocab::Id>, std::vector<vocab::Id>>> encoded;
        encoded.reserve(pairs.size());
        for (const auto& p : pairs) {
            encoded.emplace_back(vocab::encode(src_vocab, p.grapheme_word, config.max_len),
                                 vocab::encode(tgt_vocab, p.ipa_word, config.max_len));
        }
        return encoded;
    };
    auto train_enc = encode_all(train_pairs);
    auto val_enc = encode_all(val_pairs);

    auto params = model::init_params<T>(mc, config.seed);
    auto state = OptimizerState<T>::make(params);
    rng::SplitMix64 master(config.seed);
    TrainHistory history;

    std::vector<std::size_t> val_order(val_enc.size());
    for (std::size_t i = 0; i < val_order.size(); i++) val_order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; epoch++) {
        const std::uint64_t shuffle_seed = master.next();
        rng::SplitMix64 dropout_gen(master.next());

        std::vector<std::size_t> order(train_enc.size());
        for (std::size_t i = 0; i < order.size(); i++) order[i] = i;
        rng::shuffle(order, shuffle_seed);

        double loss_sum = 0, acc_sum = 0;
        std::size_t token_sum = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            auto batch = detail::assemble_batch(train_enc, order, begin, end);
            model::ForwardCache<T> cache;
            auto logits = model::forward(params, batch.src, batch.dec_in, true, &dropout_gen,
                                         &cache);
            Tensor<T> dlogits;
            const double loss = masked_ce_loss(logits, batch.target, &dlogits);
            const double acc = masked_accuracy(logits, batch.target);
            auto grads = model::backward(params, cache, dlogits);
            rmsprop_step(params, grads, state, config);
            loss_sum += loss * static_cast<double>(batch.live_tokens);
            acc_sum += acc * static_cast<double>(batch.live_tokens);
            token_sum += batch.live_tokens;
        }

        EpochRecord rec;
        rec.train_loss = loss_sum / static_cast<double>(token_sum);
        rec.train_accuracy = acc_sum / static_cast<double>(token_sum);

        if (val_enc.empty()) {
            rec.val_loss = std::numeric_limits<double>::quiet_NaN();
            rec.val_accuracy = std::numeric_limits<double>::quiet_NaN();
        } else {
            double vloss = 0, vacc = 0;
            std::size_t vtokens = 0;
            for (std::size_t begin = 0; begin < val_enc.size(); begin += config.batch_size) {
                const std::size_t end = std::min(begin + config.batch_size, val_enc.size());
                auto batch = detail::assemble_batch(val_enc, val_order, begin, end);
                auto logits = model::forward(params, batch.src, batch.dec_in);
                vloss += masked_ce_loss(logits, batch.target) *
                         static_cast<double>(batch.live_tokens);
                vacc += masked_accuracy(logits, batch.target) *
                        static_cast<double>(batch.live_tokens);
                vtokens += batch.live_tokens;
            }
            rec.val_loss = vloss / static_cast<double>(vtokens);
            rec.val_accuracy = vacc / static_cast<double>(vtokens);
        }
        history.push_back(rec);
        if (log) {
            *log << "epoch " << (epoch + 1) << "/" << config.epochs << " train_loss "
                 << rec.train_loss << " train_acc " << rec.train_accuracy << " val_loss "
                 << rec.val_loss << " val_acc " << rec.val_accuracy << "\n";
        }
    }
    return {std::move(params), std::move(history)};
}

struct GradCheckOptions {
    std::size_t sample_count = 200;
    double epsilon = 1e-4;
    std::uint64_t seed = 0;
    // Multiplies every analytic gradient; 2.0 turns the checker on itself.
    double grad_scale = 1.0;
};

// Central-difference verification of the analytic gradients on one sample,
// in double precision. Returns the max relative error over sampled scalars.
inline double grad_check(const model::ModelConfig& config, const std::vector<vocab::Id>& src,
                         const std::vector<vocab::Id>& tgt_full, GradCheckOptions opts = {}) {
    if (tgt_full.size() < 2) throw Error("gradient check target needs BOS and EOS");
    auto params = model::init_params<double>(config, opts.seed);
    const std::vector<std::vector<vocab::Id>> src_b = {src};
    const std::vector<std::vector<vocab::Id>> dec_in = {
        std::vector<vocab::Id>(tgt_full.begin(), tgt_full.end() - 1)};
    const std::vector<std::vector<vocab::Id>> target = {
        std::vector<vocab::Id>(tgt_full.begin() + 1, tgt_full.end())};

    model::ForwardCache<double> cache;
    auto logits = model::forward(params, src_b, dec_in, false, nullptr, &cache);
    Tensor<double> dlogits;
    masked_ce_loss(logits, target, &dlogits);
    auto grads = model::backward(params, cache, dlogits);

    std::vector<Tensor<double>*> param_tensors;
    params.for_each_tensor(
        [&](const std::string&, Tensor<double>& t) { param_tensors.push_back(&t); });
    std::vector<const Tensor<double>*> grad_tensors;
    grads.for_each_tensor(
        [&](const std::string&, const Tensor<double>& t) { grad_tensors.push_back(&t); });

    const std::size_t total = params.scalar_count();
    std::vector<std::size_t> picks;
    rng::SplitMix64 gen(opts.seed ^ 0x5EEDC0DE);
    if (opts.sample_count >= total) {
        picks.resize(total);
        for (std::size_t i = 0; i < total; i++) picks[i] = i;
    } else {
        std::vector<bool> taken(total, false);
        while (picks.size() < opts.sample_count) {
            std::size_t i = gen.bounded(total);
            if (!taken[i]) {
                taken[i] = true;
                picks.push_back(i);
            }
        }
    }

    auto loss_at = [&] {
        auto l = model::forward(params, src_b, dec_in);
        return masked_ce_loss(l, target);
    };

    double max_err = 0;
    for (std::size_t flat : picks) {
        std::size_t ti = 0, off = flat;
        while (off >= param_tensors[ti]->numel()) {
            off -= param_tensors[ti]->numel();
            ti++;
        }
        double* slot = param_tensors[ti]->data() + off;
        const double saved = *slot;
        *slot = saved + opts.epsilon;
        const double hi = loss_at();
        *slot = saved - opts.epsilon;
        const double lo = loss_at();
        *slot = saved;
        const double numeric = (hi - lo) / (2.0 * opts.epsilon);
        const double analytic = grad_tensors[ti]->data()[off] * opts.grad_scale;
        const double err = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-12});
        max_err = std::max(max_err, err);
    }
    return max_err;
}

inline std::string history_to_text(const TrainHistory& history) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& r : history) {
        out << r.train_loss << "\t" << r.train_accuracy << "\t" << r.val_loss << "\t"
            << r.val_accuracy << "\n";
    }
    return out.str();
}

}  // namespace banipa::trainer
