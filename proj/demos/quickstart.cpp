// End-to-end tour: train a small model on a handful of word pairs, seed the
// dictionary, and transcribe a couple of sentences under two presets.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "banipa/corpus.hpp"
#include "banipa/model.hpp"
#include "banipa/numerals.hpp"
#include "banipa/pipeline.hpp"
#include "banipa/trainer.hpp"
#include "banipa/vocab.hpp"

using namespace banipa;

int main() {
    const std::vector<corpus::WordPair> pairs = {
        {"আমি", "ami"},   {"তুমি", "tumi"}, {"ভাত", "bʰat"},  {"খাই", "kʰai"},
        {"যাই", "zai"},   {"বাড়ি", "baɽi"}, {"বারো", "baro"}, {"আম", "am"},
        {"জল", "dʒɔl"},   {"খুব", "kʰub"},  {"ভালো", "bʰalo"}, {"আজ", "adʒ"},
    };

    std::vector<std::string> graphemes, ipas;
    for (const auto& p : pairs) {
        graphemes.push_back(p.grapheme_word);
        ipas.push_back(p.ipa_word);
    }
    auto src_vocab = vocab::build_vocab(graphemes);
    auto tgt_vocab = vocab::build_vocab(ipas);

    model::ModelConfig mc;
    mc.d_model = 32;
    mc.heads = 4;
    mc.d_ff = 64;
    mc.dropout_rate = 0.0;

    trainer::TrainConfig tc;
    tc.epochs = 120;
    tc.batch_size = 12;
    tc.learning_rate = 0.002;
    tc.seed = 5;
    tc.max_len = 12;

    std::cout << "training on " << pairs.size() << " word pairs...\n";
    auto [params, history] = trainer::train<float>(tc, mc, pairs, pairs, src_vocab, tgt_vocab);
    for (std::size_t e : {std::size_t{0}, tc.epochs / 2, tc.epochs - 1}) {
        std::cout << "  epoch " << (e + 1) << ": train loss " << history[e].train_loss
                  << ", token accuracy " << history[e].train_accuracy << "\n";
    }

    // A dictionary seeded with half the pairs; the model covers the rest and
    // its answers are memoized as they are produced.
    pipeline::IpaDictionary dict;
    for (std::size_t i = 0; i < pairs.size() / 2; i++) {
        dict.insert(pairs[i].grapheme_word, pairs[i].ipa_word);
    }
    auto table = numerals::NumeralTable::load(BANIPA_DATA_DIR "/bangla_numerals.tsv");
    pipeline::ModelContext ctx{params, src_vocab, tgt_vocab, table};

    const std::vector<std::string> sentences = {
        "আমি ভাত খাই।",
        "তুমি আজ বাড়ি যাই!",
        "খুব ভালো, আমি ১২ আম খাই।",
    };
    for (const std::string& preset_name : {"B", "C"}) {
        auto config = pipeline::preset(preset_name);
        std::cout << "\npreset " << preset_name << ":\n";
        for (const auto& s : sentences) {
            std::cout << "  " << s << "\n  -> " << pipeline::transcribe_text(s, config, dict, ctx)
                      << "\n";
        }
    }

    std::cout << "\ndictionary grew to " << dict.size() << " entries; model ran "
              << ctx.model_invocations.load() << " times for "
              << (dict.hits() + dict.misses()) << " word lookups\n";
    return 0;
}
