#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "banipa/common.hpp"

namespace banipa::utf8 {

// Decodes the codepoint starting at s[i] and advances i past it.
// Returns nullopt on malformed input: bad lead byte, missing or invalid
// continuation bytes, overlong encodings, surrogates, values above U+10FFFF.
inline std::optional<char32_t> decode_one(std::string_view s, std::size_t& i) {
    if (i >= s.size()) return std::nullopt;
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return static_cast<char32_t>(b0);
    }
    int len;
    char32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1Fu;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0Fu;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07u;
    } else {
        return std::nullopt;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) return std::nullopt;
    for (int k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0) != 0x80) return std::nullopt;
        cp = (cp << 6) | (b & 0x3Fu);
    }
    static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len]) return std::nullopt;                  // overlong
    if (cp >= 0xD800 && cp <= 0xDFFF) return std::nullopt;    // surrogate
    if (cp > 0x10FFFF) return std::nullopt;
    i += static_cast<std::size_t>(len);
    return cp;
}

inline bool validate(std::string_view s) noexcept {
    std::size_t i = 0;
    while (i < s.size()) {
        if (!decode_one(s, i)) return false;
    }
    return true;
}

inline std::u32string decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto cp = decode_one(s, i);
        if (!cp) throw Error("invalid UTF-8 at byte offset " + std::to_string(i));
        out.push_back(*cp);
    }
    return out;
}

inline void append(std::string& out, char32_t c) {
    if (c < 0x80) {
        out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (c >> 6)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (c >> 12)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (c >> 18)));
        out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
}

inline std::string encode(char32_t c) {
    std::string out;
    append(out, c);
    return out;
}

inline std::string encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t c : s) append(out, c);
    return out;
}

}  // namespace banipa::utf8

namespace banipa::text {

// Unicode White_Space property.
inline bool is_space(char32_t c) {
    switch (c) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

// Splits on runs of Unicode whitespace; never yields empty words.
inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> words;
    std::string current;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto cp = utf8::decode_one(s, i);
        if (!cp) throw Error("invalid UTF-8 at byte offset " + std::to_string(i));
        if (is_space(*cp)) {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        } else {
            utf8::append(current, *cp);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

inline std::string trim_ws(std::string_view s) {
    const std::u32string cps = utf8::decode(s);
    std::size_t lo = 0;
    std::size_t hi = cps.size();
    while (lo < hi && is_space(cps[lo])) ++lo;
    while (hi > lo && is_space(cps[hi - 1])) --hi;
    return utf8::encode(std::u32string_view(cps).substr(lo, hi - lo));
}

}  // namespace banipa::text
