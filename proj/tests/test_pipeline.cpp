#include <catch2/catch_amalgamated.hpp>

#include "banipa/pipeline.hpp"
#include "test_util.hpp"

using namespace banipa;
using namespace banipa::pipeline;

namespace {

// Shared inference context over a deterministic untrained model. The vocab
// covers every Bangla word the tests mention, numeral-spelled words included.
struct Fixture {
    vocab::CharVocab src;
    vocab::CharVocab tgt;
    model::ModelParams<float> params;
    numerals::NumeralTable table;

    Fixture()
        : src(vocab::build_vocab({"আমি", "তুমি", "ভাত", "খাই", "যাই", "বারো", "এক", "শত",
                                  "তেইশ", "শূন্য"})),
          tgt(vocab::build_vocab({"ami", "tumi", "bhat", "khai", "jai", "baro"})),
          params(make_params(src, tgt)),
          table(numerals::NumeralTable::load(BANIPA_DATA_DIR "/bangla_numerals.tsv")) {}

    static model::ModelParams<float> make_params(const vocab::CharVocab& src,
                                                 const vocab::CharVocab& tgt) {
        model::ModelConfig c;
        c.d_model = 8;
        c.heads = 2;
        c.d_ff = 16;
        c.src_vocab_size = src.size();
        c.tgt_vocab_size = tgt.size();
        c.max_len = 16;
        c.dropout_rate = 0.0;
        return model::init_params<float>(c, 99);
    }

    ModelContext context() const { return ModelContext{params, src, tgt, table}; }
};

const Fixture& fx() {
    static Fixture f;
    return f;
}

// Zeroed parameters except a bias pushing EOS, so every decode is empty.
model::ModelParams<float> eos_only_params(const Fixture& f) {
    auto p = model::ModelParams<float>::make(f.params.config);
    p.out_b(vocab::EOS) = 1.0f;
    return p;
}

}  // namespace

TEST_CASE("presets match the ablation table", "[pipeline]") {
    CHECK(preset("A") == PipelineConfig{NumeralPolicy::Passthrough, false, false, false});
    CHECK(preset("B") == PipelineConfig{NumeralPolicy::Passthrough, true, true, false});
    CHECK(preset("C") == PipelineConfig{NumeralPolicy::SpellOut, true, true, false});
    CHECK(preset("D") == PipelineConfig{NumeralPolicy::Drop, true, true, true});
    CHECK_THROWS_AS(preset("E"), Error);
    CHECK_THROWS_AS(preset("a"), Error);
    CHECK_THROWS_AS(preset(""), Error);
}

TEST_CASE("dictionary lookups count hits and misses", "[pipeline]") {
    IpaDictionary dict;
    CHECK_FALSE(dict.find("আমি").has_value());
    CHECK(dict.insert("আমি", "ami"));
    CHECK_FALSE(dict.insert("আমি", "other"));  // write-once
    CHECK(dict.find("আমি") == "ami");
    CHECK(dict.hits() == 1);
    CHECK(dict.misses() == 1);
    CHECK(dict.size() == 1);
    CHECK(dict.contains("আমি"));
    CHECK_FALSE(dict.contains("ভাত"));
    CHECK(dict.hits() == 1);  // contains() does not count
    auto snap = dict.snapshot();
    REQUIRE(snap.size() == 1);
    CHECK(snap.at("আমি") == "ami");
}

TEST_CASE("a seeded dictionary answers without the model", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "ami"}});
    auto ctx = fx().context();
    RunReport report;
    CHECK(transcribe_word("আমি", dict, ctx, &report) == "ami");
    CHECK(ctx.model_invocations == 0);
    CHECK(report.dict_hits == 1);
    CHECK(report.dict_misses == 0);
}

TEST_CASE("a missed word runs the model exactly once", "[pipeline]") {
    IpaDictionary dict;
    auto ctx = fx().context();
    RunReport report;
    auto first = transcribe_word("ভাত", dict, ctx, &report);
    CHECK(ctx.model_invocations == 1);
    CHECK(dict.contains("ভাত"));
    auto second = transcribe_word("ভাত", dict, ctx, &report);
    CHECK(second == first);
    CHECK(ctx.model_invocations == 1);
    CHECK(report.dict_hits == 1);
    CHECK(report.dict_misses == 1);
}

TEST_CASE("model invocations equal distinct unseeded words", "[pipeline]") {
    std::vector<std::string> words = {"আমি", "ভাত", "আমি", "খাই", "ভাত",
                                      "যাই", "আমি", "তুমি", "খাই", "আমি"};
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "ami"}, {"যাই", "jai"}});
    auto ctx = fx().context();
    for (const auto& w : words) transcribe_word(w, dict, ctx);
    CHECK(ctx.model_invocations == 3);  // ভাত, খাই, তুমি
    for (const auto& w : words) transcribe_word(w, dict, ctx);
    CHECK(ctx.model_invocations == 3);
}

TEST_CASE("words containing whitespace are rejected", "[pipeline]") {
    IpaDictionary dict;
    auto ctx = fx().context();
    CHECK_THROWS_AS(transcribe_word("আমি ভাত", dict, ctx), Error);
}

TEST_CASE("an empty decode is stored and flagged", "[pipeline]") {
    auto params = eos_only_params(fx());
    ModelContext ctx{params, fx().src, fx().tgt, fx().table};
    IpaDictionary dict;
    RunReport report;
    CHECK(transcribe_word("আমি", dict, ctx, &report) == "");
    CHECK(report.null_outputs == 1);
    CHECK(dict.contains("আমি"));
    // The empty entry memoizes like any other.
    CHECK(transcribe_word("আমি", dict, ctx, &report) == "");
    CHECK(ctx.model_invocations == 1);
}

TEST_CASE("foreign words drop and punctuation stays under preset B", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "X"}});
    auto ctx = fx().context();
    CHECK(transcribe_text("cat আমি।", preset("B"), dict, ctx) == "X।");
    CHECK(ctx.model_invocations == 0);
}

TEST_CASE("preset A keeps foreign words and loses punctuation", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "X"}});
    auto ctx = fx().context();
    CHECK(transcribe_text("dog আমি!", preset("A"), dict, ctx) == "dog X");
}

TEST_CASE("numerals vanish under preset D", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "X"}});
    auto ctx = fx().context();
    CHECK(transcribe_text("১২ আমি", preset("D"), dict, ctx) == "X");
}

TEST_CASE("a dictionary-covered sentence maps word for word", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{
        {"আমি", "ami"}, {"ভাত", "bhat"}, {"খাই", "khai"}});
    auto ctx = fx().context();
    RunReport report;
    CHECK(transcribe_text("আমি ভাত খাই।", preset("B"), dict, ctx, &report) == "ami bhat khai।");
    CHECK(report.bangla_words == 3);
    CHECK(report.punctuation == 1);
    CHECK(report.whitespace == 2);
    CHECK(report.dict_hits == 3);
    CHECK(report.dict_misses == 0);
}

TEST_CASE("spelled-out numerals ride the word path", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{{"বারো", "baro"}});
    auto ctx = fx().context();
    RunReport report;
    CHECK(transcribe_text("১২", preset("C"), dict, ctx, &report) == "baro");
    CHECK(ctx.model_invocations == 0);
    CHECK(report.bangla_numerals == 1);
    CHECK(report.dict_hits == 1);

    IpaDictionary composed(std::map<std::string, std::string>{
        {"এক", "e"}, {"শত", "s"}, {"তেইশ", "t"}});
    CHECK(transcribe_text("১২৩", preset("C"), composed, ctx) == "e s t");
}

TEST_CASE("numerals pass through untouched under presets A and B", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "X"}});
    auto ctx = fx().context();
    CHECK(transcribe_text("আমি ১২", preset("A"), dict, ctx) == "X ১২");
    CHECK(transcribe_text("আমি ১২", preset("B"), dict, ctx) == "X ১২");
}

TEST_CASE("numeral policy never touches word transcriptions", "[pipeline]") {
    IpaDictionary d1(std::map<std::string, std::string>{{"আমি", "X"}, {"খাই", "Y"}});
    IpaDictionary d2(std::map<std::string, std::string>{{"আমি", "X"}, {"খাই", "Y"}});
    auto ctx = fx().context();
    CHECK(transcribe_text("আমি খাই।", preset("B"), d1, ctx) ==
          transcribe_text("আমি খাই।", preset("C"), d2, ctx));
}

TEST_CASE("punctuation order survives passthrough", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{
        {"আমি", "a"}, {"ভাত", "b"}, {"খাই", "c"}});
    auto ctx = fx().context();
    auto out = transcribe_text("আমি, ভাত। খাই!", preset("B"), dict, ctx);
    CHECK(out == "a, b। c!");
    std::u32string marks;
    for (char32_t cp : utf8::decode(out)) {
        if (seg::detail::is_fixed_punctuation(cp)) marks += cp;
    }
    CHECK(marks == U",।!");
}

TEST_CASE("unknown characters filter out before the dictionary", "[pipeline]") {
    // গ is outside the fixture vocabulary, so preset D reduces আগমি to আমি.
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "X"}});
    auto ctx = fx().context();
    CHECK(fx().src.id_of(U'গ') == vocab::UNK);
    CHECK(transcribe_text("আগমি", preset("D"), dict, ctx) == "X");
    CHECK(ctx.model_invocations == 0);
    // Without filtering the raw word misses and runs the model.
    IpaDictionary plain(std::map<std::string, std::string>{{"আমি", "X"}});
    transcribe_text("আগমি", preset("B"), plain, ctx);
    CHECK(ctx.model_invocations == 1);
}

TEST_CASE("a word filtered to nothing contributes nothing", "[pipeline]") {
    IpaDictionary dict(std::map<std::string, std::string>{{"আমি", "X"}});
    auto ctx = fx().context();
    // গগগ has no known characters at all.
    CHECK(transcribe_text("আমি গগগ", preset("D"), dict, ctx) == "X");
    CHECK(ctx.model_invocations == 0);
}

TEST_CASE("other symbols drop only when filtering", "[pipeline]") {
    IpaDictionary d1(std::map<std::string, std::string>{{"আমি", "X"}});
    IpaDictionary d2(std::map<std::string, std::string>{{"আমি", "X"}});
    auto ctx = fx().context();
    CHECK(transcribe_text("© আমি", preset("D"), d1, ctx) == "X");
    CHECK(transcribe_text("© আমি", preset("B"), d2, ctx) == "© X");
}

TEST_CASE("transcription is deterministic for fixed inputs", "[pipeline]") {
    auto ctx = fx().context();
    IpaDictionary d1;
    IpaDictionary d2;
    auto a = transcribe_text("আমি ১২ কলম cat!", preset("C"), d1, ctx);
    auto b = transcribe_text("আমি ১২ কলম cat!", preset("C"), d2, ctx);
    CHECK(a == b);
    CHECK(d1.snapshot() == d2.snapshot());
}

TEST_CASE("run reports serialize as key:value lines", "[pipeline]") {
    RunReport r;
    r.bangla_words = 3;
    r.bangla_numerals = 1;
    r.punctuation = 2;
    r.whitespace = 4;
    r.dict_hits = 2;
    r.dict_misses = 1;
    CHECK(report_to_text(r) ==
          "bangla_words: 3\n"
          "bangla_numerals: 1\n"
          "punctuation: 2\n"
          "foreign: 0\n"
          "whitespace: 4\n"
          "other_symbols: 0\n"
          "dict_hits: 2\n"
          "dict_misses: 1\n"
          "null_outputs: 0\n");
}
