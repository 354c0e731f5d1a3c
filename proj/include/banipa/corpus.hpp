#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/rng.hpp"
#include "banipa/utf8.hpp"

namespace banipa::corpus {

struct Sample {
    std::string text;
    std::optional<std::string> ipa;
};

struct WordPair {
    std::string grapheme_word;
    std::string ipa_word;
    bool operator==(const WordPair&) const = default;
};

struct SplitSpec {
    double train_frac = 0.90;
    double val_frac = 0.05;
    double test_frac = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        for (double f : {train_frac, val_frac, test_frac}) {
            if (!(f >= 0.0 && f <= 1.0)) throw Error("split fraction out of [0,1]");
        }
        if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
            throw Error("split fractions must sum to 1");
        }
    }
};

struct CorpusStats {
    std::size_t sample_count = 0;
    std::size_t unique_word_count = 0;
    std::size_t unique_text_chars = 0;
    std::size_t unique_ipa_chars = 0;
    std::size_t max_text_word_len = 0;
    std::size_t max_ipa_word_len = 0;
    std::map<std::size_t, std::size_t> word_count_histogram;
};

struct ExtractResult {
    std::vector<WordPair> pairs;
    std::size_t skipped_samples = 0;
    // Distinct grapheme words across all samples, counting the skipped ones;
    // pairs.size() is the post-skip unique count.
    std::size_t unique_words_seen = 0;
};

struct Split {
    std::vector<WordPair> train;
    std::vector<WordPair> val;
    std::vector<WordPair> test;
};

namespace detail {

// One logical CSV record: quoted fields may hold commas, doubled quotes, and
// newlines. `row` is the 1-based record number (header is row 1).
struct CsvRecord {
    std::vector<std::string> fields;
    std::size_t row = 0;
};

inline std::vector<CsvRecord> parse_csv(const std::string& raw) {
    std::vector<CsvRecord> records;
    std::size_t i = 0;
    const std::size_t n = raw.size();
    if (n >= 3 && raw.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;
    std::size_t row = 1;
    while (i < n) {
        CsvRecord rec;
        rec.row = row;
        std::string field;
        bool quoted = false;
        bool done = false;
        while (!done) {
            if (i >= n) {
                if (quoted) throw Error("row " + std::to_string(row) + ": unterminated quote");
                rec.fields.push_back(std::move(field));
                done = true;
                break;
            }
            char c = raw[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < n && raw[i + 1] == '"') {
                        field += '"';
                        i += 2;
                    } else {
                        quoted = false;
                        i++;
                    }
                } else {
                    field += c;
                    i++;
                }
            } else if (c == '"' && field.empty()) {
                quoted = true;
                i++;
            } else if (c == ',') {
                rec.fields.push_back(std::move(field));
                field.clear();
                i++;
            } else if (c == '\n' || c == '\r') {
                if (c == '\r' && i + 1 < n && raw[i + 1] == '\n') i++;
                i++;
                rec.fields.push_back(std::move(field));
                done = true;
            } else {
                field += c;
                i++;
            }
        }
        records.push_back(std::move(rec));
        row++;
    }
    return records;
}

inline std::size_t find_column(const CsvRecord& header, const std::string& name) {
    for (std::size_t i = 0; i < header.fields.size(); i++) {
        if (header.fields[i] == name) return i;
    }
    throw Error("missing required column '" + name + "'");
}

}  // namespace detail

inline std::vector<Sample> load_corpus(const std::string& path, bool has_ipa) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto records = detail::parse_csv(buf.str());
    if (records.empty()) throw Error("corpus file has no header row: " + path);

    const auto& header = records.front();
    std::size_t text_col = detail::find_column(header, "text");
    std::size_t ipa_col = has_ipa ? detail::find_column(header, "ipa") : 0;

    std::vector<Sample> samples;
    samples.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); r++) {
        const auto& rec = records[r];
        // A blank trailing line parses as one empty field; skip it.
        if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
        auto fail = [&](const std::string& msg) -> void {
            throw Error("row " + std::to_string(rec.row) + ": " + msg);
        };
        if (rec.fields.size() != header.fields.size()) fail("wrong field count");
        Sample s;
        s.text = rec.fields[text_col];
        if (!utf8::validate(s.text)) fail("invalid UTF-8 in text field");
        if (text::trim_ws(s.text).empty()) fail("empty text field");
        if (has_ipa) {
            const std::string& ipa = rec.fields[ipa_col];
            if (!utf8::validate(ipa)) fail("invalid UTF-8 in ipa field");
            if (text::trim_ws(ipa).empty()) fail("empty ipa field");
            s.ipa = ipa;
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

inline ExtractResult extract_word_pairs(const std::vector<Sample>& samples) {
    ExtractResult out;
    std::unordered_set<std::string> taken;
    std::unordered_set<std::string> seen_anywhere;
    for (const auto& s : samples) {
        if (!s.ipa) throw Error("extract_word_pairs requires ipa on every sample");
        auto words = text::split_ws(s.text);
        auto ipas = text::split_ws(*s.ipa);
        for (const auto& w : words) seen_anywhere.insert(w);
        if (words.size() != ipas.size()) {
            out.skipped_samples++;
            continue;
        }
        for (std::size_t i = 0; i < words.size(); i++) {
            if (taken.insert(words[i]).second) {
                out.pairs.push_back({words[i], ipas[i]});
            }
        }
    }
    out.unique_words_seen = seen_anywhere.size();
    return out;
}

inline Split split_pairs(std::vector<WordPair> pairs, const SplitSpec& spec) {
    spec.validate();
    rng::shuffle(pairs, spec.seed);
    const std::size_t n = pairs.size();
    // The epsilon keeps exact fractions like 0.90 * 100 from flooring to 89.
    auto take = [n](double frac) {
        return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
    };
    std::size_t n_train = take(spec.train_frac);
    std::size_t n_val = take(spec.val_frac);
    if (n_train + n_val > n) n_val = n - n_train;
    Split split;
    split.train.assign(pairs.begin(), pairs.begin() + n_train);
    split.val.assign(pairs.begin() + n_train, pairs.begin() + n_train + n_val);
    split.test.assign(pairs.begin() + n_train + n_val, pairs.end());
    return split;
}

inline CorpusStats compute_stats(const std::vector<Sample>& samples) {
    CorpusStats st;
    st.sample_count = samples.size();
    std::unordered_set<std::string> words;
    std::set<char32_t> text_chars;
    std::set<char32_t> ipa_chars;
    for (const auto& s : samples) {
        auto text_words = text::split_ws(s.text);
        st.word_count_histogram[text_words.size()]++;
        for (const auto& w : text_words) {
            words.insert(w);
            st.max_text_word_len = std::max(st.max_text_word_len, utf8::decode(w).size());
        }
        for (char32_t c : utf8::decode(s.text)) {
            if (!text::is_space(c)) text_chars.insert(c);
        }
        if (s.ipa) {
            for (const auto& w : text::split_ws(*s.ipa)) {
                st.max_ipa_word_len = std::max(st.max_ipa_word_len, utf8::decode(w).size());
            }
            for (char32_t c : utf8::decode(*s.ipa)) {
                if (!text::is_space(c)) ipa_chars.insert(c);
            }
        }
    }
    st.unique_word_count = words.size();
    st.unique_text_chars = text_chars.size();
    st.unique_ipa_chars = ipa_chars.size();
    return st;
}

inline std::string stats_to_text(const CorpusStats& st) {
    std::ostringstream out;
    out << "sample_count: " << st.sample_count << "\n";
    out << "unique_word_count: " << st.unique_word_count << "\n";
    out << "unique_text_chars: " << st.unique_text_chars << "\n";
    out << "unique_ipa_chars: " << st.unique_ipa_chars << "\n";
    out << "max_text_word_len: " << st.max_text_word_len << "\n";
    out << "max_ipa_word_len: " << st.max_ipa_word_len << "\n";
    out << "histogram\n";
    for (const auto& [words, count] : st.word_count_histogram) {
        out << words << "\t" << count << "\n";
    }
    return out.str();
}

}  // namespace banipa::corpus
