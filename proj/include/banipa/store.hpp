#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "banipa/common.hpp"
#include "banipa/model.hpp"
#include "banipa/pipeline.hpp"
#include "banipa/utf8.hpp"
#include "banipa/vocab.hpp"

namespace banipa::store {

inline constexpr std::string_view kCheckpointMagic = "banipa-ckpt v1";
inline constexpr std::string_view kVocabMagic = "charvocab v1";

// A loaded checkpoint: parameters plus everything needed to run them.
struct CheckpointData {
    model::ModelParams<float> params;
    vocab::CharVocab src_vocab;
    vocab::CharVocab tgt_vocab;
    std::uint64_t seed = 0;
};

namespace detail {

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

inline float get_f32(const unsigned char* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

inline std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(std::string("cannot open ") + what + " " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline void write_file(const std::string& path, std::string_view content, const char* what) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(std::string("cannot open ") + what + " " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(std::string("failed writing ") + what + " " + path);
}

// Cursor over a loaded file. Lines end at '\n'; raw reads take exact counts.
struct Reader {
    std::string_view data;
    std::size_t pos = 0;

    bool eof() const { return pos >= data.size(); }

    std::string_view line(const char* what) {
        if (eof()) throw Error(std::string("unexpected end of ") + what);
        std::size_t nl = data.find('\n', pos);
        std::string_view out;
        if (nl == std::string_view::npos) {
            out = data.substr(pos);
            pos = data.size();
        } else {
            out = data.substr(pos, nl - pos);
            pos = nl + 1;
        }
        if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
        return out;
    }

    std::string_view raw(std::size_t n, const char* what) {
        if (data.size() - pos < n) throw Error(std::string("truncated ") + what);
        std::string_view out = data.substr(pos, n);
        pos += n;
        return out;
    }
};

template <typename T>
T parse_uint(std::string_view field, const char* what) {
    T value{};
    auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || end != field.data() + field.size()) {
        throw Error(std::string("bad ") + what + " \"" + std::string(field) + "\"");
    }
    return value;
}

inline std::vector<char32_t> parse_char_list(std::string_view field) {
    std::vector<char32_t> chars;
    std::size_t pos = 0;
    while (pos < field.size()) {
        std::size_t sp = field.find(' ', pos);
        std::string_view item =
            sp == std::string_view::npos ? field.substr(pos) : field.substr(pos, sp - pos);
        pos = sp == std::string_view::npos ? field.size() : sp + 1;
        if (item.empty()) continue;
        auto cp = parse_uint<std::uint32_t>(item, "codepoint");
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            throw Error("invalid codepoint " + std::to_string(cp) + " in checkpoint vocabulary");
        }
        chars.push_back(static_cast<char32_t>(cp));
    }
    return chars;
}

inline std::string format_char_list(const vocab::CharVocab& v) {
    std::string out;
    for (char32_t cp : v.chars()) {
        if (!out.empty()) out += ' ';
        out += std::to_string(static_cast<std::uint32_t>(cp));
    }
    return out;
}

}  // namespace detail

// Plain-text header (magic, key=value config block, vocabulary contents, blank
// line), then each tensor as: name line, shape line, byte-length line, raw
// float32 little-endian data.
inline void save_checkpoint(const std::string& path, const model::ModelParams<float>& params,
                            const vocab::CharVocab& src_vocab, const vocab::CharVocab& tgt_vocab,
                            std::uint64_t seed) {
    const model::ModelConfig& c = params.config;
    if (src_vocab.size() != c.src_vocab_size || tgt_vocab.size() != c.tgt_vocab_size) {
        throw Error("checkpoint vocabularies disagree with the model configuration");
    }
    std::string out;
    out.reserve(params.scalar_count() * 4 + 4096);
    out += kCheckpointMagic;
    out += '\n';
    std::ostringstream header;
    header << "d_model=" << c.d_model << '\n'
           << "heads=" << c.heads << '\n'
           << "d_ff=" << c.d_ff << '\n'
           << "enc_layers=" << c.enc_layers << '\n'
           << "dec_layers=" << c.dec_layers << '\n'
           << "src_vocab_size=" << c.src_vocab_size << '\n'
           << "tgt_vocab_size=" << c.tgt_vocab_size << '\n'
           << "max_len=" << c.max_len << '\n'
           << "dropout_rate=" << std::setprecision(17) << c.dropout_rate << '\n'
           << "seed=" << seed << '\n'
           << "src_chars=" << detail::format_char_list(src_vocab) << '\n'
           << "tgt_chars=" << detail::format_char_list(tgt_vocab) << '\n';
    out += header.str();
    out += '\n';
    params.for_each_tensor([&](const std::string& name, const Tensor<float>& t) {
        out += name;
        out += '\n';
        for (std::size_t d = 0; d < t.rank(); d++) {
            if (d) out += ' ';
            out += std::to_string(t.dim(d));
        }
        out += '\n';
        out += std::to_string(t.numel() * 4);
        out += '\n';
        for (std::size_t i = 0; i < t.numel(); i++) detail::put_f32(out, t.data()[i]);
    });
    detail::write_file(path, out, "checkpoint");
}

inline CheckpointData load_checkpoint(const std::string& path) {
    std::string content = detail::read_file(path, "checkpoint");
    detail::Reader r{content};
    if (r.line("checkpoint") != kCheckpointMagic) {
        throw Error("not a banipa checkpoint (bad magic line): " + path);
    }
    std::map<std::string, std::string, std::less<>> header;
    for (;;) {
        std::string_view line = r.line("checkpoint header");
        if (line.empty()) break;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error("malformed checkpoint header line \"" + std::string(line) + "\"");
        }
        if (!header.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)))
                 .second) {
            throw Error("duplicate checkpoint header key \"" +
                        std::string(line.substr(0, eq)) + "\"");
        }
    }
    auto field = [&](std::string_view key) -> const std::string& {
        auto it = header.find(key);
        if (it == header.end()) {
            throw Error("checkpoint header missing key \"" + std::string(key) + "\"");
        }
        return it->second;
    };
    model::ModelConfig c;
    c.d_model = detail::parse_uint<std::size_t>(field("d_model"), "d_model");
    c.heads = detail::parse_uint<std::size_t>(field("heads"), "heads");
    c.d_ff = detail::parse_uint<std::size_t>(field("d_ff"), "d_ff");
    c.enc_layers = detail::parse_uint<std::size_t>(field("enc_layers"), "enc_layers");
    c.dec_layers = detail::parse_uint<std::size_t>(field("dec_layers"), "dec_layers");
    c.src_vocab_size = detail::parse_uint<std::size_t>(field("src_vocab_size"), "src_vocab_size");
    c.tgt_vocab_size = detail::parse_uint<std::size_t>(field("tgt_vocab_size"), "tgt_vocab_size");
    c.max_len = detail::parse_uint<std::size_t>(field("max_len"), "max_len");
    try {
        c.dropout_rate = std::stod(field("dropout_rate"));
    } catch (const std::exception&) {
        throw Error("bad dropout_rate \"" + field("dropout_rate") + "\"");
    }
    c.validate();
    std::uint64_t seed = detail::parse_uint<std::uint64_t>(field("seed"), "seed");
    vocab::CharVocab src_vocab(detail::parse_char_list(field("src_chars")));
    vocab::CharVocab tgt_vocab(detail::parse_char_list(field("tgt_chars")));
    if (src_vocab.size() != c.src_vocab_size || tgt_vocab.size() != c.tgt_vocab_size) {
        throw Error("checkpoint vocabulary size disagrees with the header configuration");
    }
    for (auto expected : {"d_model", "heads", "d_ff", "enc_layers", "dec_layers",
                          "src_vocab_size", "tgt_vocab_size", "max_len", "dropout_rate", "seed",
                          "src_chars", "tgt_chars"}) {
        header.erase(expected);
    }
    if (!header.empty()) {
        throw Error("unknown checkpoint header key \"" + header.begin()->first + "\"");
    }

    struct Stored {
        std::vector<std::size_t> shape;
        std::string_view bytes;
    };
    std::map<std::string, Stored> tensors;
    while (!r.eof()) {
        std::string name(r.line("checkpoint tensor name"));
        if (name.empty()) throw Error("empty tensor name in checkpoint");
        std::string_view shape_line = r.line("checkpoint tensor shape");
        std::vector<std::size_t> shape;
        std::size_t pos = 0;
        while (pos < shape_line.size()) {
            std::size_t sp = shape_line.find(' ', pos);
            std::string_view item = sp == std::string_view::npos ? shape_line.substr(pos)
                                                                 : shape_line.substr(pos, sp - pos);
            pos = sp == std::string_view::npos ? shape_line.size() : sp + 1;
            shape.push_back(detail::parse_uint<std::size_t>(item, "tensor dimension"));
        }
        std::size_t byte_len =
            detail::parse_uint<std::size_t>(r.line("checkpoint tensor length"), "tensor length");
        std::size_t numel = 1;
        for (std::size_t d : shape) numel *= d;
        if (shape.empty() || byte_len != numel * 4) {
            throw Error("tensor " + name + " declares " + std::to_string(byte_len) +
                        " bytes for its shape");
        }
        auto bytes = r.raw(byte_len, ("tensor " + name).c_str());
        if (!tensors.emplace(name, Stored{std::move(shape), bytes}).second) {
            throw Error("duplicate tensor " + name + " in checkpoint");
        }
    }

    CheckpointData data{model::ModelParams<float>::make(c), std::move(src_vocab),
                        std::move(tgt_vocab), seed};
    data.params.for_each_tensor([&](const std::string& name, Tensor<float>& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw Error("checkpoint is missing tensor " + name);
        if (it->second.shape != t.shape()) {
            throw Error("tensor " + name + " shape disagrees with the header configuration");
        }
        const auto* p = reinterpret_cast<const unsigned char*>(it->second.bytes.data());
        for (std::size_t i = 0; i < t.numel(); i++) t.data()[i] = detail::get_f32(p + i * 4);
        tensors.erase(it);
    });
    if (!tensors.empty()) {
        throw Error("unexpected tensor " + tensors.begin()->first + " in checkpoint");
    }
    return data;
}

// One `word<TAB>ipa` line per entry, sorted by word. An empty IPA side is
// legal; it records a word the model transcribed to nothing.
inline std::string format_dictionary(const std::map<std::string, std::string>& entries) {
    std::string out;
    for (const auto& [word, ipa] : entries) {
        out += word;
        out += '\t';
        out += ipa;
        out += '\n';
    }
    return out;
}

inline void save_dictionary(const std::string& path,
                            const std::map<std::string, std::string>& entries) {
    detail::write_file(path, format_dictionary(entries), "dictionary");
}

inline pipeline::IpaDictionary parse_dictionary(std::string_view content) {
    std::map<std::string, std::string> entries;
    detail::Reader r{content};
    std::size_t line_no = 0;
    while (!r.eof()) {
        std::string_view line = r.line("dictionary");
        line_no++;
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
            throw Error("dictionary line " + std::to_string(line_no) +
                        ": expected word<TAB>ipa");
        }
        std::string word(line.substr(0, tab));
        std::string ipa(line.substr(tab + 1));
        if (word.empty()) {
            throw Error("dictionary line " + std::to_string(line_no) + ": empty word");
        }
        for (char32_t cp : utf8::decode(word)) {
            if (text::is_space(cp)) {
                throw Error("dictionary line " + std::to_string(line_no) +
                            ": word contains whitespace");
            }
        }
        utf8::decode(ipa);
        if (!entries.emplace(std::move(word), std::move(ipa)).second) {
            throw Error("dictionary line " + std::to_string(line_no) + ": duplicate word " +
                        std::string(line.substr(0, tab)));
        }
    }
    return pipeline::IpaDictionary(std::move(entries));
}

inline pipeline::IpaDictionary load_dictionary(const std::string& path) {
    return parse_dictionary(detail::read_file(path, "dictionary"));
}

// `charvocab v1 <size>` then one decimal codepoint per line in id order; the
// four specials are implicit, so <size> exceeds the line count by four.
inline void save_vocab(const std::string& path, const vocab::CharVocab& v) {
    std::string out;
    out += kVocabMagic;
    out += ' ';
    out += std::to_string(v.size());
    out += '\n';
    for (char32_t cp : v.chars()) {
        out += std::to_string(static_cast<std::uint32_t>(cp));
        out += '\n';
    }
    detail::write_file(path, out, "vocabulary");
}

inline vocab::CharVocab load_vocab(const std::string& path) {
    std::string content = detail::read_file(path, "vocabulary");
    detail::Reader r{content};
    std::string_view first = r.line("vocabulary");
    if (first.substr(0, kVocabMagic.size()) != kVocabMagic ||
        first.size() <= kVocabMagic.size() || first[kVocabMagic.size()] != ' ') {
        throw Error("not a banipa vocabulary (bad magic line): " + path);
    }
    std::size_t declared =
        detail::parse_uint<std::size_t>(first.substr(kVocabMagic.size() + 1), "vocabulary size");
    std::vector<char32_t> chars;
    while (!r.eof()) {
        std::string_view line = r.line("vocabulary");
        if (line.empty()) continue;
        auto cp = detail::parse_uint<std::uint32_t>(line, "codepoint");
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            throw Error("invalid codepoint " + std::to_string(cp) + " in vocabulary file");
        }
        chars.push_back(static_cast<char32_t>(cp));
    }
    vocab::CharVocab v(std::move(chars));
    if (v.size() != declared) {
        throw Error("vocabulary declares " + std::to_string(declared) + " entries but holds " +
                    std::to_string(v.size()));
    }
    return v;
}

}  // namespace banipa::store
