#include <array>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "banipa/corpus.hpp"
#include "banipa/eval.hpp"
#include "banipa/model.hpp"
#include "banipa/numerals.hpp"
#include "banipa/pipeline.hpp"
#include "banipa/segmenter.hpp"
#include "banipa/store.hpp"
#include "banipa/trainer.hpp"
#include "banipa/vocab.hpp"

#ifndef BANIPA_DEFAULT_NUMERAL_TABLE
#define BANIPA_DEFAULT_NUMERAL_TABLE "data/bangla_numerals.tsv"
#endif

namespace {

using namespace banipa;

corpus::SplitSpec parse_split(const std::string& text, std::uint64_t seed) {
    std::array<double, 3> parts{};
    std::size_t pos = 0;
    for (int i = 0; i < 3; i++) {
        std::size_t colon = text.find(':', pos);
        bool last = i == 2;
        if (last != (colon == std::string::npos)) {
            throw UsageError("--split expects train:val:test, got \"" + text + "\"");
        }
        std::string field = text.substr(pos, last ? std::string::npos : colon - pos);
        try {
            std::size_t used = 0;
            parts[i] = std::stod(field, &used);
            if (used != field.size() || parts[i] < 0) throw std::invalid_argument(field);
        } catch (const std::exception&) {
            throw UsageError("--split expects train:val:test, got \"" + text + "\"");
        }
        pos = last ? text.size() : colon + 1;
    }
    double total = parts[0] + parts[1] + parts[2];
    if (total <= 0) throw UsageError("--split fractions sum to zero");
    corpus::SplitSpec spec;
    spec.train_frac = parts[0] / total;
    spec.val_frac = parts[1] / total;
    spec.test_frac = parts[2] / total;
    spec.seed = seed;
    return spec;
}

bool csv_has_column(const std::string& path, const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open data file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto records = corpus::detail::parse_csv(buf.str());
    if (records.empty()) throw Error("data file " + path + " has no header row");
    for (const auto& field : records[0].fields) {
        if (field == name) return true;
    }
    return false;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(text.substr(pos));
            break;
        }
        out.push_back(text.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

void require_preset_names(const std::vector<std::string>& names) {
    if (names.empty()) throw UsageError("no presets given");
    for (const auto& name : names) {
        if (name != "A" && name != "B" && name != "C" && name != "D") {
            throw UsageError("unknown preset \"" + name + "\" (expected A, B, C, or D)");
        }
    }
}

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return std::move(buf).str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open input " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open output " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing output " + path);
}

// Splits text into lines the way transcription consumes them: one entry per
// newline-terminated line, plus a final unterminated line if present.
std::vector<std::string> input_lines(const std::string& content) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) {
            lines.push_back(content.substr(pos));
            break;
        }
        lines.push_back(content.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

struct TrainArgs {
    std::string data;
    std::string out_checkpoint;
    std::string out_dict;
    std::string out_history;
    std::string split = "90:5:5";
    trainer::TrainConfig tc;
    std::size_t d_model = 512;
    std::size_t heads = 8;
    std::size_t d_ff = 2560;
    double dropout = 0.1;
    bool seq_accuracy = false;
};

int cmd_train(const TrainArgs& args) {
    if (!csv_has_column(args.data, "ipa")) {
        throw UsageError("data file " + args.data + " has no ipa column");
    }
    auto samples = corpus::load_corpus(args.data, /*has_ipa=*/true);
    auto extracted = corpus::extract_word_pairs(samples);
    std::cerr << "samples: " << samples.size() << ", skipped: " << extracted.skipped_samples
              << ", unique word pairs: " << extracted.pairs.size() << "\n";
    auto split = corpus::split_pairs(extracted.pairs, parse_split(args.split, args.tc.seed));
    std::cerr << "split: " << split.train.size() << " train, " << split.val.size() << " val, "
              << split.test.size() << " test\n";

    std::vector<std::string> graphemes;
    std::vector<std::string> ipas;
    for (const auto& p : extracted.pairs) {
        graphemes.push_back(p.grapheme_word);
        ipas.push_back(p.ipa_word);
    }
    vocab::CharVocab src_vocab = vocab::build_vocab(graphemes);
    vocab::CharVocab tgt_vocab = vocab::build_vocab(ipas);

    model::ModelConfig mc;
    mc.d_model = args.d_model;
    mc.heads = args.heads;
    mc.d_ff = args.d_ff;
    mc.dropout_rate = args.dropout;
    auto [params, history] =
        trainer::train<float>(args.tc, mc, split.train, split.val, src_vocab, tgt_vocab,
                              &std::cerr);

    store::save_checkpoint(args.out_checkpoint, params, src_vocab, tgt_vocab, args.tc.seed);
    std::map<std::string, std::string> seeded;
    for (const auto& p : split.train) seeded.emplace(p.grapheme_word, p.ipa_word);
    store::save_dictionary(args.out_dict, seeded);
    std::string history_path = args.out_history.empty()
                                   ? args.out_checkpoint + ".history.tsv"
                                   : args.out_history;
    store::detail::write_file(history_path, trainer::history_to_text(history), "history");

    const auto& last = history.back();
    std::ostringstream out;
    out << std::setprecision(6);
    out << "train_loss: " << last.train_loss << "\n"
        << "train_accuracy: " << last.train_accuracy << "\n"
        << "val_loss: " << last.val_loss << "\n"
        << "val_accuracy: " << last.val_accuracy << "\n";
    if (args.seq_accuracy) {
        double exact = std::numeric_limits<double>::quiet_NaN();
        if (!split.val.empty()) {
            std::size_t hits = 0;
            for (const auto& p : split.val) {
                auto ids = vocab::encode(src_vocab, p.grapheme_word, args.tc.max_len);
                auto decoded = model::greedy_decode(params, ids);
                if (vocab::decode(tgt_vocab, decoded.ids) == p.ipa_word) hits++;
            }
            exact = static_cast<double>(hits) / static_cast<double>(split.val.size());
        }
        out << "val_sequence_accuracy: " << exact << "\n";
    }
    std::cout << out.str();
    return 0;
}

struct TranscribeArgs {
    std::string checkpoint;
    std::string dict;
    std::string preset = "D";
    std::string in = "-";
    std::string out = "-";
    std::string numerals = BANIPA_DEFAULT_NUMERAL_TABLE;
};

pipeline::IpaDictionary load_dict_or_empty(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        std::cerr << "dictionary " << path << " not found; starting empty\n";
        return pipeline::IpaDictionary();
    }
    return store::load_dictionary(path);
}

int cmd_transcribe(const TranscribeArgs& args) {
    require_preset_names({args.preset});
    auto config = pipeline::preset(args.preset);
    auto ckpt = store::load_checkpoint(args.checkpoint);
    auto dict = load_dict_or_empty(args.dict);
    auto table = numerals::NumeralTable::load(args.numerals);
    pipeline::ModelContext ctx{ckpt.params, ckpt.src_vocab, ckpt.tgt_vocab, table};

    auto lines = input_lines(read_input(args.in));
    pipeline::RunReport report;
    std::string out;
    for (const auto& line : lines) {
        out += pipeline::transcribe_text(line, config, dict, ctx, &report);
        out += '\n';
    }
    write_output(args.out, out);
    store::save_dictionary(args.dict, dict.snapshot());
    std::cerr << pipeline::report_to_text(report)
              << "model_invocations: " << ctx.model_invocations.load() << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string dict;
    std::string data;
    std::string presets = "A,B,C,D";
    std::string numerals = BANIPA_DEFAULT_NUMERAL_TABLE;
};

int cmd_eval(const EvalArgs& args) {
    auto names = split_list(args.presets);
    require_preset_names(names);
    if (!csv_has_column(args.data, "ipa")) {
        throw UsageError("data file " + args.data + " has no ipa column");
    }
    auto samples = corpus::load_corpus(args.data, /*has_ipa=*/true);
    auto ckpt = store::load_checkpoint(args.checkpoint);
    auto dict = load_dict_or_empty(args.dict);
    auto table = numerals::NumeralTable::load(args.numerals);
    pipeline::ModelContext ctx{ckpt.params, ckpt.src_vocab, ckpt.tgt_vocab, table};
    auto rows = eval::ablation_report(names, samples, dict.snapshot(), ctx);
    std::cout << eval::ablation_to_text(rows);
    return 0;
}

int cmd_stats(const std::string& data) {
    bool has_ipa = csv_has_column(data, "ipa");
    auto samples = corpus::load_corpus(data, has_ipa);
    std::cout << corpus::stats_to_text(corpus::compute_stats(samples));
    return 0;
}

int cmd_segment(const std::string& text) {
    for (const auto& tok : seg::segment(text)) {
        std::cout << seg::to_string(tok.kind) << '\t' << tok.start << '\t' << tok.end << '\t'
                  << tok.text << '\n';
    }
    return 0;
}

int cmd_dict_export(const std::string& dict_path, const std::string& file) {
    auto dict = store::load_dictionary(dict_path);
    write_output(file, store::format_dictionary(dict.snapshot()));
    return 0;
}

int cmd_dict_import(const std::string& dict_path, const std::string& file) {
    auto dict = load_dict_or_empty(dict_path);
    auto incoming = store::parse_dictionary(read_input(file));
    std::size_t added = 0;
    for (const auto& [word, ipa] : incoming.snapshot()) {
        if (dict.insert(word, ipa)) added++;
    }
    store::save_dictionary(dict_path, dict.snapshot());
    std::cerr << "imported " << added << " new entries, " << dict.size() << " total\n";
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"Bangla grapheme-to-phoneme toolkit"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a transcription model from word/IPA pairs");
    train->add_option("--data", train_args.data, "Labeled CSV with text and ipa columns")
        ->required();
    train->add_option("--out-checkpoint", train_args.out_checkpoint, "Checkpoint output path")
        ->required();
    train->add_option("--out-dict", train_args.out_dict, "Seeded dictionary output path")
        ->required();
    train->add_option("--out-history", train_args.out_history,
                      "History output path (default: <out-checkpoint>.history.tsv)");
    train->add_option("--epochs", train_args.tc.epochs, "Training epochs")
        ->capture_default_str();
    train->add_option("--batch", train_args.tc.batch_size, "Batch size")->capture_default_str();
    train->add_option("--lr", train_args.tc.learning_rate, "Learning rate")
        ->capture_default_str();
    train->add_option("--split", train_args.split, "train:val:test fractions")
        ->capture_default_str();
    train->add_option("--seed", train_args.tc.seed, "Shuffle and init seed")
        ->capture_default_str();
    train->add_option("--d-model", train_args.d_model, "Model width")->capture_default_str();
    train->add_option("--heads", train_args.heads, "Attention heads")->capture_default_str();
    train->add_option("--d-ff", train_args.d_ff, "Feed-forward width")->capture_default_str();
    train->add_option("--max-len", train_args.tc.max_len, "Max encoded word length")
        ->capture_default_str();
    train->add_option("--dropout", train_args.dropout, "Dropout rate")->capture_default_str();
    train->add_flag("--seq-accuracy", train_args.seq_accuracy,
                    "Also report sequence-exact validation accuracy");

    TranscribeArgs tr_args;
    auto* tr = app.add_subcommand("transcribe", "Transcribe text to IPA, one line at a time");
    tr->add_option("--checkpoint", tr_args.checkpoint, "Trained checkpoint")->required();
    tr->add_option("--dict", tr_args.dict, "Dictionary path (read and written back)")
        ->required();
    tr->add_option("--preset", tr_args.preset, "Token policy preset (A|B|C|D)")
        ->capture_default_str();
    tr->add_option("--in", tr_args.in, "Input file, - for stdin")->capture_default_str();
    tr->add_option("--out", tr_args.out, "Output file, - for stdout")->capture_default_str();
    tr->add_option("--numerals", tr_args.numerals, "Numeral word table")
        ->capture_default_str();

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "Score presets against labeled data");
    ev->add_option("--checkpoint", eval_args.checkpoint, "Trained checkpoint")->required();
    ev->add_option("--dict", eval_args.dict, "Seed dictionary")->required();
    ev->add_option("--data", eval_args.data, "Labeled CSV with text and ipa columns")
        ->required();
    ev->add_option("--presets", eval_args.presets, "Comma-separated preset names")
        ->capture_default_str();
    ev->add_option("--numerals", eval_args.numerals, "Numeral word table")
        ->capture_default_str();

    std::string stats_data;
    auto* st = app.add_subcommand("stats", "Corpus statistics and word-count histogram");
    st->add_option("--data", stats_data, "CSV with a text column")->required();

    std::string segment_text;
    auto* sg = app.add_subcommand("segment", "Debug token dump for one line of text");
    sg->add_option("--text", segment_text, "Text to segment")->required();

    auto* dc = app.add_subcommand("dict", "Dictionary file utilities");
    dc->require_subcommand(1);
    std::string dict_path;
    std::string dict_file = "-";
    auto* dexp = dc->add_subcommand("export", "Write dictionary entries to a file or stdout");
    auto* dimp = dc->add_subcommand("import", "Merge entries from a file or stdin");
    for (auto* sub : {dexp, dimp}) {
        sub->add_option("--dict", dict_path, "Dictionary path")->required();
        sub->add_option("--file", dict_file, "Entry file, - for stdio")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*train) return cmd_train(train_args);
    if (*tr) return cmd_transcribe(tr_args);
    if (*ev) return cmd_eval(eval_args);
    if (*st) return cmd_stats(stats_data);
    if (*sg) return cmd_segment(segment_text);
    if (*dexp) return cmd_dict_export(dict_path, dict_file);
    if (*dimp) return cmd_dict_import(dict_path, dict_file);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const banipa::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const banipa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
