#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/utf8.hpp"

namespace banipa::seg {

enum class TokenKind {
    BanglaWord,
    BanglaNumeral,
    Punctuation,
    Foreign,
    Whitespace,
    OtherSymbol,
};

enum class CharClass {
    BanglaLetter,
    BanglaDigit,
    Whitespace,
    Punctuation,
    ForeignLetter,
    OtherSymbol,
};

struct Token {
    TokenKind kind;
    std::string text;
    // Codepoint offsets into the source, end exclusive.
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const Token&) const = default;
};

// The default punctuation set can be extended per call site; the fixed part
// covers ASCII punctuation, danda marks, curly quotes and en/em dashes.
struct SegmentOptions {
    std::vector<char32_t> extra_punctuation;
};

namespace detail {

inline bool is_fixed_punctuation(char32_t c) {
    if ((c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
        (c >= 0x7B && c <= 0x7E)) {
        return true;
    }
    switch (c) {
        case 0x0964:  // danda
        case 0x0965:  // double danda
        case 0x2018:
        case 0x2019:
        case 0x201C:
        case 0x201D:
        case 0x2013:
        case 0x2014:
            return true;
        default:
            return false;
    }
}

// Coarse letter-script ranges; approximate on purpose, OtherSymbol absorbs the
// rest. The Bangla block is tested before this table is consulted.
inline bool is_alphabetic(char32_t c) {
    static constexpr std::array<std::pair<char32_t, char32_t>, 24> ranges{{
        {0x0041, 0x005A},
        {0x0061, 0x007A},
        {0x00C0, 0x00D6},
        {0x00D8, 0x00F6},
        {0x00F8, 0x02AF},
        {0x0370, 0x03FF},
        {0x0400, 0x052F},
        {0x0531, 0x058F},
        {0x05D0, 0x05F2},
        {0x0620, 0x064A},
        {0x0671, 0x06D3},
        {0x0900, 0x097F},
        {0x0A00, 0x0B7F},
        {0x0B80, 0x0BFF},
        {0x0C00, 0x0DFF},
        {0x0E01, 0x0E4E},
        {0x10A0, 0x10FF},
        {0x1100, 0x11FF},
        {0x1E00, 0x1FFF},
        {0x3040, 0x30FF},
        {0x3400, 0x4DBF},
        {0x4E00, 0x9FFF},
        {0xAC00, 0xD7A3},
        {0x10330, 0x1034A},
    }};
    for (const auto& [lo, hi] : ranges) {
        if (c < lo) return false;
        if (c <= hi) return true;
    }
    return false;
}

}  // namespace detail

inline CharClass classify_char(char32_t c, const SegmentOptions& opts = {}) {
    if (c >= 0x09E6 && c <= 0x09EF) return CharClass::BanglaDigit;
    if (c >= 0x0980 && c <= 0x09FF) return CharClass::BanglaLetter;
    if (text::is_space(c)) return CharClass::Whitespace;
    if (detail::is_fixed_punctuation(c)) return CharClass::Punctuation;
    if (std::find(opts.extra_punctuation.begin(), opts.extra_punctuation.end(), c) !=
        opts.extra_punctuation.end()) {
        return CharClass::Punctuation;
    }
    // ASCII digits get no transcription of their own; lump them with foreign
    // text so the drop-foreign policy removes them.
    if (c >= '0' && c <= '9') return CharClass::ForeignLetter;
    if (detail::is_alphabetic(c)) return CharClass::ForeignLetter;
    return CharClass::OtherSymbol;
}

inline TokenKind token_kind_for(CharClass cls) {
    switch (cls) {
        case CharClass::BanglaLetter: return TokenKind::BanglaWord;
        case CharClass::BanglaDigit: return TokenKind::BanglaNumeral;
        case CharClass::Whitespace: return TokenKind::Whitespace;
        case CharClass::Punctuation: return TokenKind::Punctuation;
        case CharClass::ForeignLetter: return TokenKind::Foreign;
        case CharClass::OtherSymbol: return TokenKind::OtherSymbol;
    }
    return TokenKind::OtherSymbol;
}

inline std::vector<Token> segment(const std::string& text_utf8, const SegmentOptions& opts = {}) {
    std::u32string cps = utf8::decode(text_utf8);
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < cps.size()) {
        CharClass cls = classify_char(cps[i], opts);
        std::size_t j = i + 1;
        // Punctuation marks stand alone; every other class forms maximal runs.
        if (cls != CharClass::Punctuation) {
            while (j < cps.size() && classify_char(cps[j], opts) == cls) j++;
        }
        Token tok;
        tok.kind = token_kind_for(cls);
        tok.text = utf8::encode(std::u32string_view(cps).substr(i, j - i));
        tok.start = i;
        tok.end = j;
        tokens.push_back(std::move(tok));
        i = j;
    }
    return tokens;
}

inline std::string reassemble(const std::vector<Token>& tokens,
                              const std::vector<std::optional<std::string>>& replacements) {
    if (tokens.size() != replacements.size()) {
        throw Error("reassemble: got " + std::to_string(replacements.size()) +
                    " replacements for " + std::to_string(tokens.size()) + " tokens");
    }
    std::string joined;
    for (std::size_t i = 0; i < tokens.size(); i++) {
        joined += replacements[i] ? *replacements[i] : tokens[i].text;
    }
    // Collapse multi-codepoint whitespace runs to a single space, then trim.
    // Lone whitespace codepoints pass through verbatim.
    std::u32string cps = utf8::decode(joined);
    std::u32string collapsed;
    std::size_t i = 0;
    while (i < cps.size()) {
        if (text::is_space(cps[i])) {
            std::size_t j = i + 1;
            while (j < cps.size() && text::is_space(cps[j])) j++;
            collapsed += (j - i > 1) ? U' ' : cps[i];
            i = j;
        } else {
            collapsed += cps[i++];
        }
    }
    return text::trim_ws(utf8::encode(collapsed));
}

inline const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::BanglaWord: return "BanglaWord";
        case TokenKind::BanglaNumeral: return "BanglaNumeral";
        case TokenKind::Punctuation: return "Punctuation";
        case TokenKind::Foreign: return "Foreign";
        case TokenKind::Whitespace: return "Whitespace";
        case TokenKind::OtherSymbol: return "OtherSymbol";
    }
    return "OtherSymbol";
}

inline std::string tokens_to_text(const std::vector<Token>& tokens) {
    std::ostringstream out;
    for (const auto& t : tokens) {
        out << to_string(t.kind) << "\t" << t.start << "\t" << t.end << "\t" << t.text << "\n";
    }
    return out.str();
}

}  // namespace banipa::seg
