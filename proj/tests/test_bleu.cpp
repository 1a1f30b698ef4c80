#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "clteval/pipeline.hpp"
#include "test_util.hpp"

using namespace clteval;

namespace {

nlohmann::json load_oracle() {
    return nlohmann::json::parse(util::read_text_file(testutil::fixture_path("bleu_oracle.json")));
}

}  // namespace

TEST_CASE("sentence BLEU reproduces every frozen oracle pair") {
    nlohmann::json oracle = load_oracle();
    REQUIRE(oracle.at("pairs").size() >= 30);
    for (const auto& pair : oracle["pairs"]) {
        CAPTURE(pair.at("name").get<std::string>());
        mt::PipelineConfig cfg;
        cfg.max_ngram_order = pair.at("max_order").get<int>();
        double got = mt::bleu_score(pair.at("candidate").get<std::string>(),
                                    pair.at("reference").get<std::string>(), cfg);
        double want = pair.at("score").get<double>();
        CHECK(std::abs(got - want) < 1e-6);
    }
}

TEST_CASE("identity scores 100 regardless of length or script") {
    CHECK(mt::bleu_score("hello", "hello") == doctest::Approx(100.0));
    CHECK(mt::bleu_score("一条大河", "一条大河") == doctest::Approx(100.0));
}

TEST_CASE("order adapts to short candidates instead of zeroing out") {
    // Two tokens: only orders 1 and 2 participate.
    double two = mt::bleu_score("hello world", "hello world");
    CHECK(two == doctest::Approx(100.0));
    // A one-token candidate against a long reference is brevity-punished,
    // not zero.
    double one = mt::bleu_score("hello", "hello there general kenobi");
    CHECK(one > 0.0);
    CHECK(one < 10.0);
}

TEST_CASE("smoothing only activates when some precision is zero") {
    mt::PipelineConfig smoothed;  // default add-one
    mt::PipelineConfig raw;
    raw.smoothing = mt::Smoothing::none;

    // All precisions positive: smoothing must not change the score.
    std::string cand = "the cat sat on a mat";
    std::string ref = "the cat sat on the mat";
    CHECK(mt::bleu_score(cand, ref, smoothed) == doctest::Approx(mt::bleu_score(cand, ref, raw)));

    // A zero higher-order precision: raw collapses to 0, smoothed survives.
    std::string cand2 = "dogs bark cats meow";
    std::string ref2 = "dogs bark and cats meow";
    CHECK(mt::bleu_score(cand2, ref2, raw) == doctest::Approx(0.0));
    CHECK(mt::bleu_score(cand2, ref2, smoothed) > 0.0);

    // Zero unigram overlap is never smoothed away.
    CHECK(mt::bleu_score("alpha beta", "gamma delta", smoothed) == doctest::Approx(0.0));
}

TEST_CASE("empty-after-tokenization inputs score zero without throwing") {
    CHECK(mt::bleu_score("", "reference text") == doctest::Approx(0.0));
    CHECK(mt::bleu_score("   \t ", "reference text") == doctest::Approx(0.0));
    CHECK(mt::bleu_score("candidate text", "") == doctest::Approx(0.0));
}

TEST_CASE("brevity penalty punishes short candidates but not long ones") {
    CHECK(mt::bleu_score("a b c d e", "a b c d e") == doctest::Approx(100.0));

    // A perfect prefix has precision 1.0 at every order, so the whole loss
    // is the brevity penalty: 100 * exp(1 - 6/5).
    double shorter = mt::bleu_score("a b c d e", "a b c d e f");
    CHECK(std::abs(shorter - 81.87307530779819) < 1e-9);

    // A long candidate pays no brevity penalty: the score equals the
    // geometric mean of the precisions alone, (7/8 * 6/7 * 5/6 * 4/5)^(1/4).
    double longer = mt::bleu_score("a b c d e f g h", "a b c d e f g");
    CHECK(std::abs(longer - 84.08964152537145) < 1e-9);
}

TEST_CASE("config validation bounds") {
    mt::PipelineConfig cfg;
    cfg.bleu_threshold = 101.0;
    CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
    cfg = {};
    cfg.max_ngram_order = 0;
    CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
    cfg = {};
    cfg.bucket_count = 0;
    CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
    CHECK(mt::smoothing_from_string("none") == mt::Smoothing::none);
    CHECK(mt::smoothing_from_string("add-one") == mt::Smoothing::add_one_geq2);
    CHECK_THROWS_AS(mt::smoothing_from_string("bogus"), util::ConfigError);
}
