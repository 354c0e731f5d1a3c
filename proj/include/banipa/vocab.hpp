#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/utf8.hpp"

namespace banipa::vocab {

using Id = std::uint32_t;

inline constexpr Id PAD = 0;
inline constexpr Id UNK = 1;
inline constexpr Id BOS = 2;
inline constexpr Id EOS = 3;
inline constexpr std::size_t kSpecialCount = 4;

class CharVocab {
public:
    CharVocab() = default;

    // Characters must already be in id order (id = 4 + position).
    explicit CharVocab(std::vector<char32_t> chars) : chars_(std::move(chars)) {
        for (std::size_t i = 0; i < chars_.size(); i++) {
            auto [it, fresh] = index_.emplace(chars_[i], static_cast<Id>(kSpecialCount + i));
            if (!fresh) throw Error("vocabulary contains a duplicate codepoint");
        }
    }

    std::size_t size() const { return kSpecialCount + chars_.size(); }
    const std::vector<char32_t>& chars() const { return chars_; }

    Id id_of(char32_t c) const {
        auto it = index_.find(c);
        return it == index_.end() ? UNK : it->second;
    }

    char32_t char_of(Id id) const {
        if (id < kSpecialCount || id >= size()) throw Error("id has no character");
        return chars_[id - kSpecialCount];
    }

    bool operator==(const CharVocab& other) const { return chars_ == other.chars_; }

private:
    std::vector<char32_t> chars_;
    std::unordered_map<char32_t, Id> index_;
};

inline CharVocab build_vocab(const std::vector<std::string>& words) {
    std::map<char32_t, std::size_t> freq;
    for (const auto& w : words) {
        for (char32_t c : utf8::decode(w)) freq[c]++;
    }
    std::vector<char32_t> chars;
    chars.reserve(freq.size());
    for (const auto& [c, n] : freq) chars.push_back(c);
    std::stable_sort(chars.begin(), chars.end(), [&](char32_t a, char32_t b) {
        if (freq[a] != freq[b]) return freq[a] > freq[b];
        return a < b;
    });
    return CharVocab(std::move(chars));
}

inline std::vector<Id> encode(const CharVocab& vocab, const std::string& word,
                              std::size_t max_len) {
    if (max_len < 2) throw Error("max_len must be at least 2");
    std::u32string cps = utf8::decode(word);
    if (cps.size() > max_len - 2) {
        throw Error("word of " + std::to_string(cps.size()) + " characters overflows max_len " +
                    std::to_string(max_len));
    }
    std::vector<Id> ids;
    ids.reserve(max_len);
    ids.push_back(BOS);
    for (char32_t c : cps) ids.push_back(vocab.id_of(c));
    ids.push_back(EOS);
    ids.resize(max_len, PAD);
    return ids;
}

inline std::string decode(const CharVocab& vocab, const std::vector<Id>& ids) {
    std::u32string out;
    for (Id id : ids) {
        if (id >= vocab.size()) throw Error("id " + std::to_string(id) + " out of vocabulary");
        if (id == EOS) break;
        if (id == BOS || id == PAD) continue;
        out += (id == UNK) ? char32_t{0xFFFD} : vocab.char_of(id);
    }
    return utf8::encode(out);
}

}  // namespace banipa::vocab
