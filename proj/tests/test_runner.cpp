// End-to-end tests for clteval::runner: config parsing/validation, grid
// expansion, resource pre-flight, the full echo-gold evaluation loop with
// cache-idempotent reruns, and report emission.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clteval/clteval.hpp"
#include "test_util.hpp"

using namespace clteval;
using nlohmann::json;

namespace {

// One shared world: parallel demonstration buckets built through the real
// pipeline (identity translator), a run config on disk, and a completed cold
// run against the echo-gold endpoint. Built once; later cases reuse the
// populated cache directory for warm-rerun checks.
struct EvalWorld {
    testutil::TempDir dir;
    runner::RunConfig cfg;  // baseline parsed config, output_dir = run1
    runner::RunResult cold;
    std::string config_path;

    static EvalWorld& instance() {
        static EvalWorld world;
        return world;
    }

    std::string run1() const { return dir.str("run1"); }

private:
    EvalWorld() {
        // Demonstration pools: the 16-item training corpus, identity-translated
        // into each target, bucketed in parallel (2 buckets of 3).
        auto train = corpus::load_qa_dataset(testutil::fixture_path("qa_en_train.json"),
                                             corpus::QaFormat::squad_v1, "en");
        mt::IdentityTranslator translator;
        mt::PipelineConfig pcfg;
        pcfg.bucket_count = 2;
        pcfg.bucket_size = 3;
        pcfg.rng_seed = 11;
        std::map<std::string, std::vector<mt::Example>> pools;
        for (const std::string target : {"de", "es"}) {
            std::vector<mt::Example> accepted;
            for (auto& outcome : mt::run_quality_stage(train, "en", target, translator, pcfg)) {
                if (outcome.accepted) accepted.push_back(std::move(outcome.translated));
            }
            pools[target] = std::move(accepted);
        }
        auto buckets = mt::build_parallel_buckets(train, pools, pcfg);
        std::filesystem::create_directories(dir.str("buckets"));
        for (const std::string target : {"de", "es"}) {
            mt::write_buckets_jsonl(dir.str("buckets/buckets_" + target + ".jsonl"),
                                    buckets.at(target));
        }

        json config{
            {"models", json::array({json{{"name", "echo-7b"},
                                         {"family", "bloom"},
                                         {"endpoint", "echo-gold"}}})},
            {"task", "qa"},
            {"source_language", "en"},
            {"target_languages", {"de", "es"}},
            {"methods", {"MONO", "OUT_CLT", "IN_CLT_TGT_A"}},
            {"shots", {0, 2}},
            {"buckets", {0, 1}},
            {"corpus_dir", testutil::fixture_path("")},
            {"corpus_pattern", "qa_{lang}.json"},
            {"demo_source_path", testutil::fixture_path("qa_en_train.json")},
            {"buckets_dir", dir.str("buckets")},
            {"templates_path", testutil::data_path("templates.json")},
            {"localization_path", testutil::data_path("localization.json")},
            {"cache_dir", dir.str("cache")},
            {"output_dir", run1()},
            {"max_in_flight", 3},
        };
        config_path = dir.str("run.json");
        util::write_text_file_atomic(config_path, config.dump(2) + "\n");

        cfg = runner::parse_run_config(config_path);
        cold = runner::run_eval(cfg);
    }
};

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += (c == '\n');
    return n;
}

}  // namespace

TEST_CASE("parse_run_config: round trip and defaults") {
    EvalWorld& world = EvalWorld::instance();
    const runner::RunConfig& cfg = world.cfg;

    CHECK(cfg.models.size() == 1);
    CHECK(cfg.models[0].name == "echo-7b");
    CHECK(cfg.models[0].endpoint == "echo-gold");
    CHECK(cfg.models[0].port == 80);  // default
    CHECK(cfg.task == corpus::Task::qa);
    CHECK(cfg.source_language == "en");
    CHECK(cfg.target_languages == std::vector<std::string>{"de", "es"});
    CHECK(cfg.methods.size() == 3);
    CHECK(cfg.shots == std::vector<int>{0, 2});
    CHECK(cfg.separator == "\n\n");      // default
    CHECK(cfg.max_in_flight == 3);
    CHECK(cfg.decode.temperature == 0.0);
    CHECK(cfg.decode.max_new_tokens == 32);

    // The canonical config serialization (and so the digest) is stable.
    runner::RunConfig again = runner::parse_run_config(world.config_path);
    CHECK(runner::config_to_json(cfg).dump() == runner::config_to_json(again).dump());
}

TEST_CASE("parse_run_config: malformed and incomplete files") {
    testutil::TempDir dir;
    util::write_text_file_atomic(dir.str("broken.json"), "{\"models\": [");
    CHECK_THROWS_WITH_AS(runner::parse_run_config(dir.str("broken.json")),
                         doctest::Contains("malformed run config"), util::ConfigError);

    util::write_text_file_atomic(dir.str("missing.json"), R"({"task": "qa"})");
    CHECK_THROWS_WITH_AS(runner::parse_run_config(dir.str("missing.json")),
                         doctest::Contains("missing fields"), util::ConfigError);
}

TEST_CASE("RunConfig::validate rejects inconsistent grids") {
    runner::RunConfig cfg = EvalWorld::instance().cfg;
    CHECK_NOTHROW(cfg.validate());

    SUBCASE("cross-lingual methods exclude the source language from targets") {
        cfg.target_languages = {"de", "en"};
        CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("absent from the target list"),
                             util::ConfigError);
        // MONO alone is fine with the source as a target.
        cfg.methods = {"MONO"};
        CHECK_NOTHROW(cfg.validate());
    }
    SUBCASE("unknown method names are rejected up front") {
        cfg.methods = {"MONO", "IN_CLT"};
        CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
    }
    SUBCASE("negative shots and bucket indices") {
        cfg.shots = {0, -1};
        CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
        cfg.shots = {0};
        cfg.buckets = {-2};
        CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
    }
    SUBCASE("empty axes") {
        auto broken = cfg;
        broken.models.clear();
        CHECK_THROWS_AS(broken.validate(), util::ConfigError);
        broken = cfg;
        broken.methods.clear();
        CHECK_THROWS_AS(broken.validate(), util::ConfigError);
        broken = cfg;
        broken.buckets.clear();
        CHECK_THROWS_AS(broken.validate(), util::ConfigError);
    }
    SUBCASE("decode and execution limits") {
        cfg.decode.temperature = 0.7;
        CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
        cfg.decode.temperature = 0.0;
        cfg.max_in_flight = 0;
        CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
        cfg.max_in_flight = 1;
        cfg.output_dir.clear();
        CHECK_THROWS_AS(cfg.validate(), util::ConfigError);
    }
}

TEST_CASE("expand_grid: sorted cells, stable keys") {
    const runner::RunConfig& cfg = EvalWorld::instance().cfg;
    std::vector<runner::GridCell> cells = runner::expand_grid(cfg);
    CHECK(cells.size() == 24);  // 1 model x 2 languages x 3 methods x 2 k x 2 buckets
    CHECK(std::is_sorted(cells.begin(), cells.end()));
    CHECK(cells.front().key(corpus::Task::qa) == "echo-7b/qa/de/IN_CLT_TGT_A/k=0/b=0");
    CHECK(cells.back().key(corpus::Task::qa) == "echo-7b/qa/es/OUT_CLT/k=2/b=1");
    std::set<std::string> keys;
    for (const auto& cell : cells) keys.insert(cell.key(cfg.task));
    CHECK(keys.size() == cells.size());
}

TEST_CASE("run_eval: cold echo-gold run scores perfectly and writes artifacts") {
    EvalWorld& world = EvalWorld::instance();
    const runner::RunResult& result = world.cold;

    CHECK(result.failed_cells.empty());
    CHECK(result.bucket_rows.size() == 24);
    CHECK(result.aggregates_f1.size() == 12);
    CHECK(result.scores.size() == 24 * 8);

    // The echo-gold endpoint replays the gold answer for every query, so F1
    // and EM are perfect across every method, not just MONO.
    for (const auto& agg : result.aggregates_f1) {
        CAPTURE(agg.language + "/" + agg.method + "/k=" + std::to_string(agg.k));
        CHECK(agg.mean == 100.0);
        CHECK(agg.stddev == 0.0);
        CHECK(agg.n_buckets == 2);
    }
    for (const auto& row : result.bucket_rows) {
        CHECK(row.mean_f1 == 100.0);
        CHECK(row.mean_em == 100.0);
        CHECK(row.n_examples == 8);
    }

    // Unique prompts, deduplicated by the disk cache within the run:
    //   - 8 zero-shot queries per language, shared by all methods and buckets;
    //   - 8 x 3 methods x 2 buckets two-shot variants per language, EXCEPT
    //     that for German the mixed-context method renders byte-identically
    //     to the monolingual one: the identity translator makes the bucket
    //     texts equal to the source originals, and the German field label
    //     for the context attribute is spelled the same as the English one,
    //     so the only differing attribute collapses. Spanish labels differ,
    //     so no such collapse there.
    // de: 8 + (48 - 16) = 40; es: 8 + 48 = 56; total 96.
    CHECK(result.endpoint_calls == 96);

    std::filesystem::path run(world.run1());
    for (const char* name :
         {"scores.jsonl", "generations.jsonl", "bucket_scores.tsv", "aggregates.tsv",
          "manifest.json"}) {
        CAPTURE(name);
        CHECK(std::filesystem::exists(run / name));
    }

    CHECK(count_lines(util::read_text_file(run / "scores.jsonl")) == 192);
    std::string generations = util::read_text_file(run / "generations.jsonl");
    CHECK(count_lines(generations) == 192);
    // Volatile per-call details stay out of the persisted artifacts so warm
    // reruns are byte-identical.
    CHECK(generations.find("latency_ms") == std::string::npos);
    CHECK(generations.find("from_cache") == std::string::npos);

    std::string bucket_tsv = util::read_text_file(run / "bucket_scores.tsv");
    CHECK(count_lines(bucket_tsv) == 25);  // header + one row per grid cell
    CHECK(bucket_tsv.rfind("model\tlanguage\tmethod\tk\tbucket\tmean_f1\tmean_em\tn\n", 0) == 0);
    CHECK(count_lines(util::read_text_file(run / "aggregates.tsv")) == 13);

    json manifest = json::parse(util::read_text_file(run / "manifest.json"));
    CHECK(manifest.at("grid").size() == 24);
    CHECK(manifest.at("failed_cells").empty());
    CHECK(manifest.at("config_digest").get<std::string>().size() == 64);
    CHECK(manifest.at("config_digest").get<std::string>() ==
          util::sha256_hex(runner::config_to_json(world.cfg).dump()));
    // Input digests cover corpora, buckets, demo source, templates, localization.
    CHECK(manifest.at("input_digests").size() == 8);

    // First score line parses back to a perfect QA score.
    std::string scores_text = util::read_text_file(run / "scores.jsonl");
    json first = json::parse(scores_text.substr(0, scores_text.find('\n')));
    CHECK(first.at("f1").get<double>() == 1.0);
    CHECK(first.at("exact_match").get<double>() == 1.0);
}

TEST_CASE("run_eval: warm rerun makes zero endpoint calls, byte-identical outputs") {
    EvalWorld& world = EvalWorld::instance();
    runner::RunConfig warm_cfg = world.cfg;
    warm_cfg.output_dir = world.dir.str("run2");

    runner::RunResult warm = runner::run_eval(warm_cfg);
    CHECK(warm.endpoint_calls == 0);
    CHECK(warm.failed_cells.empty());
    CHECK(warm.aggregates_f1.size() == 12);

    for (const char* name :
         {"scores.jsonl", "generations.jsonl", "bucket_scores.tsv", "aggregates.tsv",
          "manifest.json"}) {
        CAPTURE(name);
        std::string cold_bytes =
            util::read_text_file(std::filesystem::path(world.run1()) / name);
        std::string warm_bytes =
            util::read_text_file(std::filesystem::path(world.dir.str("run2")) / name);
        CHECK(cold_bytes == warm_bytes);
    }
}

TEST_CASE("resolve_resources: pre-flight failures precede any endpoint call") {
    EvalWorld& world = EvalWorld::instance();

    SUBCASE("missing corpus file") {
        runner::RunConfig cfg = world.cfg;
        cfg.target_languages = {"de", "zz"};
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg),
                             doctest::Contains("corpus file for 'zz' not found"),
                             util::ConfigError);
    }
    SUBCASE("corpus pattern must contain the language placeholder") {
        runner::RunConfig cfg = world.cfg;
        cfg.corpus_pattern = "qa_en.json";
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg),
                             doctest::Contains("must contain {lang}"), util::ConfigError);
    }
    SUBCASE("missing bucket file") {
        runner::RunConfig cfg = world.cfg;
        testutil::TempDir empty;
        cfg.buckets_dir = empty.str();
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg),
                             doctest::Contains("bucket file for 'de' not found"),
                             util::ConfigError);
    }
    SUBCASE("missing bucket index") {
        runner::RunConfig cfg = world.cfg;
        cfg.buckets = {0, 7};
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg), doctest::Contains("bucket 7 missing"),
                             util::ConfigError);
    }
    SUBCASE("k exceeding the bucket size") {
        runner::RunConfig cfg = world.cfg;
        cfg.shots = {0, 4};
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg),
                             doctest::Contains("holds 3 examples but k=4"), util::ConfigError);
    }
    SUBCASE("source-language methods require a demo source") {
        runner::RunConfig cfg = world.cfg;
        cfg.demo_source_path.clear();
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg),
                             doctest::Contains("require demo_source_path"), util::ConfigError);
        // MONO-only grids do not.
        cfg.methods = {"MONO"};
        CHECK_NOTHROW(runner::resolve_resources(cfg));
    }
    SUBCASE("every demonstration id must resolve to a source original") {
        runner::RunConfig cfg = world.cfg;
        auto buckets = mt::read_buckets_jsonl(world.dir.str("buckets/buckets_de.jsonl"));
        buckets[0].examples[0].id = "zz";
        testutil::TempDir patched;
        mt::write_buckets_jsonl(patched.str("buckets_de.jsonl"), buckets);
        auto es = mt::read_buckets_jsonl(world.dir.str("buckets/buckets_es.jsonl"));
        mt::write_buckets_jsonl(patched.str("buckets_es.jsonl"), es);
        cfg.buckets_dir = patched.str();
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg),
                             doctest::Contains("no source-language original"), util::ConfigError);
    }
    SUBCASE("localization must cover every involved language") {
        runner::RunConfig cfg = world.cfg;
        json loc = json::parse(util::read_text_file(testutil::data_path("localization.json")));
        loc.erase("es");
        testutil::TempDir patched;
        util::write_text_file_atomic(patched.str("loc.json"), loc.dump());
        cfg.localization_path = patched.str("loc.json");
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg), doctest::Contains("es"),
                             util::ConfigError);
    }
    SUBCASE("the task template must exist") {
        runner::RunConfig cfg = world.cfg;
        json templates =
            json::parse(util::read_text_file(testutil::data_path("templates.json")));
        templates.erase("qa");
        testutil::TempDir patched;
        util::write_text_file_atomic(patched.str("templates.json"), templates.dump());
        cfg.templates_path = patched.str("templates.json");
        CHECK_THROWS_WITH_AS(runner::resolve_resources(cfg),
                             doctest::Contains("no template for task 'qa'"), util::ConfigError);
    }
    SUBCASE("successful pre-flight resolves everything needed") {
        runner::ResolvedResources res = runner::resolve_resources(world.cfg);
        CHECK(res.eval_corpus.by_language.size() == 3);  // en + de + es
        CHECK(res.demo_source.size() == 16);
        CHECK(res.buckets.at("de").size() == 2);
        CHECK(res.buckets.at("es").size() == 2);
        CHECK(res.templates.count(corpus::Task::qa) == 1);
        CHECK(res.input_digests.size() == 8);
    }
}

TEST_CASE("emit_report: renders the pivot table for a completed run") {
    EvalWorld& world = EvalWorld::instance();
    runner::emit_report(world.run1());
    std::filesystem::path table = std::filesystem::path(world.run1()) / "score_table.tsv";
    REQUIRE(std::filesystem::exists(table));
    std::string rendered = util::read_text_file(table);
    CHECK(rendered.rfind("model\tmethod\tk\tde\tes\n", 0) == 0);
    CHECK(count_lines(rendered) == 7);  // header + 3 methods x 2 k
    CHECK(rendered.find("100.00 ± 0.00") != std::string::npos);
    CHECK(rendered.find("\t-") == std::string::npos);  // no absent cells

    // Emission is idempotent and deterministic.
    runner::emit_report(world.run1());
    CHECK(util::read_text_file(table) == rendered);
}

TEST_CASE("emit_report: missing inputs and missing aggregates are explicit errors") {
    EvalWorld& world = EvalWorld::instance();
    testutil::TempDir dir;

    CHECK_THROWS_WITH_AS(runner::emit_report(dir.str()), doctest::Contains("lacks manifest.json"),
                         util::DataError);

    std::string manifest_bytes =
        util::read_text_file(std::filesystem::path(world.run1()) / "manifest.json");
    util::write_text_file_atomic(dir.str("manifest.json"), manifest_bytes);
    CHECK_THROWS_WITH_AS(runner::emit_report(dir.str()), doctest::Contains("lacks aggregates.tsv"),
                         util::DataError);

    // Header-only aggregates: every grid cell group is reported missing.
    util::write_text_file_atomic(dir.str("aggregates.tsv"),
                                 "model\ttask\tlanguage\tmethod\tk\tmean\tstd\tstderr\tn_buckets\n");
    CHECK_THROWS_WITH_AS(runner::emit_report(dir.str()),
                         doctest::Contains("aggregates missing for 12 grid cell group(s)"),
                         util::DataError);
    CHECK_THROWS_WITH_AS(runner::emit_report(dir.str()),
                         doctest::Contains("echo-7b/qa/de/MONO/k=0"), util::DataError);
}

TEST_CASE("emit_report: cells recorded as failed are excused, not missing") {
    EvalWorld& world = EvalWorld::instance();
    testutil::TempDir dir;
    json manifest =
        json::parse(util::read_text_file(std::filesystem::path(world.run1()) / "manifest.json"));
    std::string aggregates =
        util::read_text_file(std::filesystem::path(world.run1()) / "aggregates.tsv");

    // A grid cell with no aggregate row and no failure record is an error...
    manifest["grid"].push_back("ghost/qa/de/MONO/k=0/b=0");
    util::write_text_file_atomic(dir.str("manifest.json"), manifest.dump(1) + "\n");
    util::write_text_file_atomic(dir.str("aggregates.tsv"), aggregates);
    CHECK_THROWS_WITH_AS(runner::emit_report(dir.str()),
                         doctest::Contains("ghost/qa/de/MONO/k=0"), util::DataError);

    // ...but the same cell listed under failed_cells is excused.
    manifest["failed_cells"].push_back("ghost/qa/de/MONO/k=0/b=0: endpoint unreachable");
    util::write_text_file_atomic(dir.str("manifest.json"), manifest.dump(1) + "\n");
    CHECK_NOTHROW(runner::emit_report(dir.str()));
    CHECK(std::filesystem::exists(dir.str("score_table.tsv")));
}
