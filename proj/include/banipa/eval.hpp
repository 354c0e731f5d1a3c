#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/corpus.hpp"
#include "banipa/pipeline.hpp"
#include "banipa/utf8.hpp"

namespace banipa::eval {

struct WerResult {
    std::uint64_t substitutions = 0;
    std::uint64_t insertions = 0;
    std::uint64_t deletions = 0;
    std::uint64_t ref_words = 0;
    double wer = 0.0;

    bool operator==(const WerResult&) const = default;
};

// Word-level edit distance with unit costs. Counts come from one optimal
// backtrace; ties resolve substitution first, then deletion, then insertion,
// so the reported triple is deterministic.
inline WerResult wer(const std::string& reference, const std::string& hypothesis) {
    auto ref = text::split_ws(reference);
    auto hyp = text::split_ws(hypothesis);
    if (ref.empty()) throw Error("wer: empty reference");
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    std::vector<std::uint32_t> d((n + 1) * (m + 1));
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return d[i * (m + 1) + j]; };
    for (std::size_t i = 0; i <= n; i++) at(i, 0) = static_cast<std::uint32_t>(i);
    for (std::size_t j = 0; j <= m; j++) at(0, j) = static_cast<std::uint32_t>(j);
    for (std::size_t i = 1; i <= n; i++) {
        for (std::size_t j = 1; j <= m; j++) {
            if (ref[i - 1] == hyp[j - 1]) {
                at(i, j) = at(i - 1, j - 1);
            } else {
                at(i, j) = 1 + std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
            }
        }
    }
    WerResult result;
    result.ref_words = n;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && at(i, j) == at(i - 1, j - 1)) {
            i--;
            j--;
        } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
            result.substitutions++;
            i--;
            j--;
        } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
            result.deletions++;
            i--;
        } else {
            result.insertions++;
            j--;
        }
    }
    result.wer = static_cast<double>(result.substitutions + result.insertions + result.deletions) /
                 static_cast<double>(n);
    return result;
}

// Micro-average: operations and reference words sum over all pairs before the
// division.
inline WerResult aggregate_wer(const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) throw Error("aggregate_wer: no pairs");
    WerResult total;
    for (const auto& [reference, hypothesis] : pairs) {
        WerResult one = wer(reference, hypothesis);
        total.substitutions += one.substitutions;
        total.insertions += one.insertions;
        total.deletions += one.deletions;
        total.ref_words += one.ref_words;
    }
    total.wer = static_cast<double>(total.substitutions + total.insertions + total.deletions) /
                static_cast<double>(total.ref_words);
    return total;
}

inline double corpus_wer(const std::vector<std::pair<std::string, std::string>>& pairs) {
    return aggregate_wer(pairs).wer;
}

struct AblationRow {
    std::string preset_name;
    WerResult result;

    bool operator==(const AblationRow&) const = default;
};

// Transcribes every labeled sample under each preset and scores it against
// the reference IPA. Each preset starts from its own copy of the seed
// dictionary so one preset's cache never leaks into another's.
inline std::vector<AblationRow> ablation_report(
    const std::vector<std::string>& preset_names, const std::vector<corpus::Sample>& samples,
    const std::map<std::string, std::string>& dict_entries, const pipeline::ModelContext& ctx) {
    if (samples.empty()) throw Error("ablation_report: no samples");
    for (const auto& s : samples) {
        if (!s.ipa) throw Error("ablation_report: sample without reference ipa");
    }
    std::vector<AblationRow> rows;
    rows.reserve(preset_names.size());
    for (const auto& name : preset_names) {
        pipeline::PipelineConfig config = pipeline::preset(name);
        pipeline::IpaDictionary dict(dict_entries);
        std::vector<std::pair<std::string, std::string>> pairs;
        pairs.reserve(samples.size());
        for (const auto& s : samples) {
            pairs.emplace_back(*s.ipa, pipeline::transcribe_text(s.text, config, dict, ctx));
        }
        rows.push_back({name, aggregate_wer(pairs)});
    }
    return rows;
}

inline std::string ablation_to_text(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    for (const auto& row : rows) {
        out << row.preset_name << '\t' << row.result.wer << '\t' << row.result.substitutions
            << '\t' << row.result.insertions << '\t' << row.result.deletions << '\t'
            << row.result.ref_words << '\n';
    }
    return out.str();
}

}  // namespace banipa::eval
