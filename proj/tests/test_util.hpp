#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/corpus.hpp"
#include "banipa/rng.hpp"

namespace testutil {

inline std::filesystem::path temp_dir() {
    static std::atomic<unsigned> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("banipa_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw banipa::Error("test helper failed to write " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw banipa::Error("test helper failed to read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Letter-to-IPA rules backing the synthetic corpus; a learnable toy task
// with the same shape as the real one.
inline const std::map<char, std::string>& substitution_rules() {
    static const std::map<char, std::string> rules = [] {
        std::map<char, std::string> m;
        std::ifstream in(std::string(BANIPA_TEST_DATA_DIR) + "/substitution_rules.tsv");
        if (!in) throw banipa::Error("missing substitution_rules.tsv");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto tab = line.find('\t');
            m[line[0]] = line.substr(tab + 1);
        }
        return m;
    }();
    return rules;
}

inline std::string apply_rules(const std::string& word) {
    std::string out;
    for (char c : word) out += substitution_rules().at(c);
    return out;
}

// Distinct pseudo-words of length 3..8 over a-z, paired with their rule-mapped
// transcriptions. Deterministic under seed.
inline std::vector<banipa::corpus::WordPair> make_rule_corpus(std::size_t n_words,
                                                              std::uint64_t seed) {
    banipa::rng::SplitMix64 gen(seed);
    std::unordered_set<std::string> seen;
    std::vector<banipa::corpus::WordPair> pairs;
    while (pairs.size() < n_words) {
        std::size_t len = 3 + gen.bounded(6);
        std::string w;
        for (std::size_t i = 0; i < len; i++) {
            w += static_cast<char>('a' + gen.bounded(26));
        }
        if (seen.insert(w).second) {
            pairs.push_back({w, apply_rules(w)});
        }
    }
    return pairs;
}

// Five labeled sentences exercising foreign words, punctuation, and a
// numeral, with a dictionary covering every Bangla word. The per-preset WERs
// are hand-derived and asserted where the corpus is used.
struct MicroCorpus {
    std::vector<banipa::corpus::Sample> samples;
    std::map<std::string, std::string> dict;
};

inline MicroCorpus micro_corpus() {
    MicroCorpus mc;
    mc.dict = {{"আমি", "ami"}, {"তুমি", "tumi"},  {"ভাত", "bhat"}, {"খাই", "khai"},
               {"যাই", "jai"}, {"বাড়ি", "bari"}, {"বারো", "baro"}};
    mc.samples = {
        {"আমি ভাত খাই।", "ami bhat khai।"},
        {"তুমি cat যাই।", "tumi jai।"},
        {"আমি বাড়ি যাই", "ami bari jai"},
        {"তুমি ১২ খাই।", "tumi ১২ khai।"},
        {"dog আমি, তুমি!", "ami, tumi!"},
    };
    return mc;
}

}  // namespace testutil
