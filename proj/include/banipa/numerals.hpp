#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/utf8.hpp"

namespace banipa::numerals {

inline constexpr char32_t kDigitZero = U'০';
inline constexpr char32_t kDigitNine = U'৯';

// Word names for the values 0..99 plus the positional units 100 (shoto),
// 1000 (hajar), 1e5 (lakh), and 1e7 (koti), keyed by value. Loaded from a
// tab-separated data file so the naming inventory stays auditable.
class NumeralTable {
public:
    static NumeralTable parse(std::string_view text) {
        NumeralTable table;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t nl = text.find('\n', pos);
            std::string_view line =
                nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            line_no++;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty()) continue;
            std::size_t tab = line.find('\t');
            if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
                throw Error("numeral table line " + std::to_string(line_no) +
                            ": expected value<TAB>word");
            }
            std::string_view value_field = line.substr(0, tab);
            std::string_view word = line.substr(tab + 1);
            std::uint64_t value = 0;
            auto [end, ec] =
                std::from_chars(value_field.data(), value_field.data() + value_field.size(), value);
            if (ec != std::errc() || end != value_field.data() + value_field.size()) {
                throw Error("numeral table line " + std::to_string(line_no) + ": bad value \"" +
                            std::string(value_field) + "\"");
            }
            if (word.empty()) {
                throw Error("numeral table line " + std::to_string(line_no) + ": empty word");
            }
            utf8::decode(word);
            if (!table.words_.emplace(value, std::string(word)).second) {
                throw Error("numeral table line " + std::to_string(line_no) +
                            ": duplicate value " + std::to_string(value));
            }
        }
        for (std::uint64_t v = 0; v < 100; v++) table.require(v);
        for (std::uint64_t v : {100ull, 1000ull, 100000ull, 10000000ull}) table.require(v);
        return table;
    }

    static NumeralTable load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open numeral table " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    const std::string& word_for(std::uint64_t value) const {
        auto it = words_.find(value);
        if (it == words_.end()) {
            throw Error("no numeral word for value " + std::to_string(value));
        }
        return it->second;
    }

    std::size_t size() const { return words_.size(); }

private:
    void require(std::uint64_t value) const {
        if (!words_.contains(value)) {
            throw Error("numeral table missing entry for " + std::to_string(value));
        }
    }

    std::map<std::uint64_t, std::string> words_;
};

namespace detail {

inline std::vector<int> digit_values(std::string_view digits_utf8) {
    auto cps = utf8::decode(digits_utf8);
    if (cps.empty()) throw Error("empty numeral");
    std::vector<int> out;
    out.reserve(cps.size());
    for (char32_t cp : cps) {
        if (cp < kDigitZero || cp > kDigitNine) {
            throw Error("non-digit codepoint in numeral \"" + std::string(digits_utf8) + "\"");
        }
        out.push_back(static_cast<int>(cp - kDigitZero));
    }
    return out;
}

inline std::string name_per_digit(const NumeralTable& table, const std::vector<int>& digits) {
    std::string out;
    for (int d : digits) {
        if (!out.empty()) out += ' ';
        out += table.word_for(static_cast<std::uint64_t>(d));
    }
    return out;
}

inline std::string name_value(const NumeralTable& table, std::uint64_t value) {
    if (value < 100) return table.word_for(value);
    static constexpr std::uint64_t units[] = {10000000, 100000, 1000, 100};
    std::string out;
    for (std::uint64_t unit : units) {
        std::uint64_t count = value / unit;
        if (count == 0) continue;
        if (!out.empty()) out += ' ';
        out += table.word_for(count);
        out += ' ';
        out += table.word_for(unit);
        value %= unit;
    }
    if (value != 0) {
        out += ' ';
        out += table.word_for(value);
    }
    return out;
}

}  // namespace detail

// Names the number written in Bangla digits. Values below one billion compose
// from the 0..99 names and the positional units; longer numerals fall back to
// naming each digit in turn.
inline std::string spell_out(const NumeralTable& table, std::string_view digits_utf8) {
    auto digits = detail::digit_values(digits_utf8);
    std::size_t first = 0;
    while (first + 1 < digits.size() && digits[first] == 0) first++;
    const std::size_t effective = digits.size() - first;
    if (effective > 9) return detail::name_per_digit(table, digits);
    std::uint64_t value = 0;
    for (std::size_t i = first; i < digits.size(); i++) {
        value = value * 10 + static_cast<std::uint64_t>(digits[i]);
    }
    return detail::name_value(table, value);
}

// Names each digit independently, e.g. the two-digit numeral 10 comes out as
// the words for one and zero.
inline std::string spell_out_per_digit(const NumeralTable& table, std::string_view digits_utf8) {
    return detail::name_per_digit(table, detail::digit_values(digits_utf8));
}

}  // namespace banipa::numerals
