#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/model.hpp"
#include "banipa/numerals.hpp"
#include "banipa/segmenter.hpp"
#include "banipa/utf8.hpp"
#include "banipa/vocab.hpp"

namespace banipa::pipeline {

enum class NumeralPolicy { Passthrough, SpellOut, Drop };

struct PipelineConfig {
    NumeralPolicy numeral_policy = NumeralPolicy::Passthrough;
    bool drop_foreign = false;
    bool punctuation_passthrough = false;
    bool filter_unknown_chars = false;

    bool operator==(const PipelineConfig&) const = default;
};

// The four ablation presets, from bare model output (A) to full token
// handling (D).
inline PipelineConfig preset(std::string_view name) {
    if (name == "A") return {NumeralPolicy::Passthrough, false, false, false};
    if (name == "B") return {NumeralPolicy::Passthrough, true, true, false};
    if (name == "C") return {NumeralPolicy::SpellOut, true, true, false};
    if (name == "D") return {NumeralPolicy::Drop, true, true, true};
    throw Error("unknown preset \"" + std::string(name) + "\" (expected A, B, C, or D)");
}

// Word-to-IPA memo. Lookups count hits and misses; inserts are write-once, so
// concurrent misses on one word settle on a single stored value.
class IpaDictionary {
public:
    IpaDictionary() = default;
    explicit IpaDictionary(std::map<std::string, std::string> entries)
        : entries_(std::move(entries)) {}

    std::optional<std::string> find(const std::string& word) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = entries_.find(word);
        if (it == entries_.end()) {
            misses_++;
            return std::nullopt;
        }
        hits_++;
        return it->second;
    }

    bool insert(const std::string& word, const std::string& ipa) {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.emplace(word, ipa).second;
    }

    bool contains(const std::string& word) const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.contains(word);
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.size();
    }

    std::uint64_t hits() const {
        std::lock_guard<std::mutex> lock(mu_);
        return hits_;
    }

    std::uint64_t misses() const {
        std::lock_guard<std::mutex> lock(mu_);
        return misses_;
    }

    std::map<std::string, std::string> snapshot() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

// Everything a transcription run shares besides the dictionary: trained
// parameters, the two character vocabularies, and the numeral naming table.
// model_invocations counts greedy decodes across all users of the context.
struct ModelContext {
    const model::ModelParams<float>& params;
    const vocab::CharVocab& src_vocab;
    const vocab::CharVocab& tgt_vocab;
    const numerals::NumeralTable& numeral_table;
    mutable std::atomic<std::uint64_t> model_invocations{0};
};

// Per-run accounting: token counts by kind, dictionary traffic, and words
// whose model output came back empty.
struct RunReport {
    std::uint64_t bangla_words = 0;
    std::uint64_t bangla_numerals = 0;
    std::uint64_t punctuation = 0;
    std::uint64_t foreign = 0;
    std::uint64_t whitespace = 0;
    std::uint64_t other_symbols = 0;
    std::uint64_t dict_hits = 0;
    std::uint64_t dict_misses = 0;
    std::uint64_t null_outputs = 0;

    bool operator==(const RunReport&) const = default;
};

inline std::string report_to_text(const RunReport& r) {
    std::ostringstream out;
    out << "bangla_words: " << r.bangla_words << '\n'
        << "bangla_numerals: " << r.bangla_numerals << '\n'
        << "punctuation: " << r.punctuation << '\n'
        << "foreign: " << r.foreign << '\n'
        << "whitespace: " << r.whitespace << '\n'
        << "other_symbols: " << r.other_symbols << '\n'
        << "dict_hits: " << r.dict_hits << '\n'
        << "dict_misses: " << r.dict_misses << '\n'
        << "null_outputs: " << r.null_outputs << '\n';
    return out.str();
}

namespace detail {

inline std::string filter_to_vocab(const std::string& word, const vocab::CharVocab& v) {
    std::string out;
    for (char32_t cp : utf8::decode(word)) {
        if (v.id_of(cp) != vocab::UNK) utf8::append(out, cp);
    }
    return out;
}

}  // namespace detail

// Dictionary-first word transcription. A miss runs the model once and stores
// the result, empty or not, so later calls for the same word never touch the
// model again.
inline std::string transcribe_word(const std::string& word, IpaDictionary& dict,
                                   const ModelContext& ctx, RunReport* report = nullptr) {
    for (char32_t cp : utf8::decode(word)) {
        if (text::is_space(cp)) {
            throw Error("transcribe_word got a word containing whitespace");
        }
    }
    if (auto stored = dict.find(word)) {
        if (report) report->dict_hits++;
        return *stored;
    }
    if (report) report->dict_misses++;
    auto src = vocab::encode(ctx.src_vocab, word, ctx.params.config.max_len);
    ctx.model_invocations.fetch_add(1, std::memory_order_relaxed);
    auto decoded = model::greedy_decode(ctx.params, src);
    std::string ipa = vocab::decode(ctx.tgt_vocab, decoded.ids);
    if (ipa.empty() && report) report->null_outputs++;
    dict.insert(word, ipa);
    return ipa;
}

// Sentence transcription: segment, apply the per-kind policy to each token,
// reassemble in place. Whitespace always survives verbatim; empty
// substitutions disappear through reassembly's whitespace collapse.
inline std::string transcribe_text(const std::string& text_utf8, const PipelineConfig& config,
                                   IpaDictionary& dict, const ModelContext& ctx,
                                   RunReport* report = nullptr,
                                   const seg::SegmentOptions& seg_opts = {}) {
    auto tokens = seg::segment(text_utf8, seg_opts);
    // nullopt keeps the token's own text.
    std::vector<std::optional<std::string>> pieces(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); i++) {
        const auto& tok = tokens[i];
        switch (tok.kind) {
            case seg::TokenKind::BanglaWord: {
                if (report) report->bangla_words++;
                std::string word = tok.text;
                if (config.filter_unknown_chars) {
                    word = detail::filter_to_vocab(word, ctx.src_vocab);
                }
                pieces[i] = word.empty() ? std::string()
                                         : transcribe_word(word, dict, ctx, report);
                break;
            }
            case seg::TokenKind::BanglaNumeral: {
                if (report) report->bangla_numerals++;
                switch (config.numeral_policy) {
                    case NumeralPolicy::Passthrough:
                        break;
                    case NumeralPolicy::Drop:
                        pieces[i] = std::string();
                        break;
                    case NumeralPolicy::SpellOut: {
                        std::string joined;
                        auto words =
                            text::split_ws(numerals::spell_out(ctx.numeral_table, tok.text));
                        for (const auto& w : words) {
                            if (!joined.empty()) joined += ' ';
                            joined += transcribe_word(w, dict, ctx, report);
                        }
                        pieces[i] = joined;
                        break;
                    }
                }
                break;
            }
            case seg::TokenKind::Foreign:
                if (report) report->foreign++;
                if (config.drop_foreign) pieces[i] = std::string();
                break;
            case seg::TokenKind::Punctuation:
                if (report) report->punctuation++;
                if (!config.punctuation_passthrough) pieces[i] = std::string();
                break;
            case seg::TokenKind::Whitespace:
                if (report) report->whitespace++;
                break;
            case seg::TokenKind::OtherSymbol:
                if (report) report->other_symbols++;
                if (config.filter_unknown_chars) pieces[i] = std::string();
                break;
        }
    }
    return seg::reassemble(tokens, pieces);
}

}  // namespace banipa::pipeline
