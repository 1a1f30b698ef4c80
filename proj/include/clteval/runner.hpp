#pragma once

// Evaluation orchestration: run configuration, the model x task x language x
// method x k x bucket grid, cache-first generation, scoring, aggregation,
// manifests, and report emission.

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clteval/analysis.hpp"
#include "clteval/corpus.hpp"
#include "clteval/generation.hpp"
#include "clteval/metrics.hpp"
#include "clteval/pipeline.hpp"
#include "clteval/prompt.hpp"
#include "clteval/report.hpp"
#include "clteval/util.hpp"

namespace clteval::runner {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelSpec {
    std::string name;           // row label in outputs
    std::string family;         // model family for profile lookups
    std::string endpoint;       // "echo-gold" (offline mock) or "http"
    std::string host;           // http only
    int port = 80;              // http only
    std::string path = "/v1/completions";
    std::string token_env = "CLTEVAL_GEN_TOKEN";
};

struct RunConfig {
    std::vector<ModelSpec> models;
    corpus::Task task = corpus::Task::qa;
    corpus::QaFormat qa_format = corpus::QaFormat::squad_v1;
    std::string source_language = "en";
    std::vector<std::string> target_languages;
    std::vector<std::string> methods;
    std::vector<int> shots;
    std::vector<int> buckets;  // bucket indices to evaluate
    std::string corpus_dir;
    std::string corpus_pattern = "{lang}.json";  // file name per language
    std::string demo_source_path;                // source-language demo originals
    std::string buckets_dir;                     // buckets_<lang>.jsonl per target
    std::string templates_path;
    std::string localization_path;
    std::string cache_dir;
    std::string output_dir;
    int max_in_flight = 4;
    bool fail_fast = false;
    std::string separator = "\n\n";
    infer::DecodeParams decode;
    util::RetryPolicy retry;

    void validate() const {
        if (models.empty()) throw util::ConfigError("run config lists no models");
        if (target_languages.empty()) throw util::ConfigError("run config lists no target languages");
        if (methods.empty()) throw util::ConfigError("run config lists no methods");
        if (shots.empty()) throw util::ConfigError("run config lists no shot counts");
        if (buckets.empty()) throw util::ConfigError("run config selects no buckets");
        for (const auto& method : methods) {
            prompt::resolve_assignment(method);  // throws on unknown names
            if (method != "MONO") {
                for (const auto& target : target_languages) {
                    if (target == source_language) {
                        throw util::ConfigError(
                            "cross-lingual method " + method + " requires source language '" +
                            source_language + "' to be absent from the target list");
                    }
                }
            }
        }
        for (int k : shots) {
            if (k < 0) throw util::ConfigError("shot counts must be >= 0");
        }
        for (int b : buckets) {
            if (b < 0) throw util::ConfigError("bucket indices must be >= 0");
        }
        decode.validate();
        if (max_in_flight < 1) throw util::ConfigError("max_in_flight must be >= 1");
        if (output_dir.empty()) throw util::ConfigError("output_dir is required");
    }
};

inline RunConfig parse_run_config(const std::string& path) {
    json root;
    try {
        root = json::parse(util::read_text_file(path));
    } catch (const json::exception& e) {
        throw util::ConfigError("malformed run config " + path + ": " + e.what());
    }
    RunConfig cfg;
    try {
        for (const auto& m : root.at("models")) {
            ModelSpec spec;
            spec.name = m.at("name").get<std::string>();
            spec.family = m.value("family", std::string{});
            spec.endpoint = m.at("endpoint").get<std::string>();
            spec.host = m.value("host", std::string{});
            spec.port = m.value("port", 80);
            spec.path = m.value("path", std::string{"/v1/completions"});
            spec.token_env = m.value("token_env", std::string{"CLTEVAL_GEN_TOKEN"});
            cfg.models.push_back(std::move(spec));
        }
        cfg.task = corpus::task_from_string(root.at("task").get<std::string>());
        if (root.contains("qa_format")) {
            cfg.qa_format = corpus::qa_format_from_string(root["qa_format"].get<std::string>());
        }
        cfg.source_language = root.value("source_language", std::string{"en"});
        cfg.target_languages = root.at("target_languages").get<std::vector<std::string>>();
        cfg.methods = root.at("methods").get<std::vector<std::string>>();
        cfg.shots = root.at("shots").get<std::vector<int>>();
        cfg.buckets = root.at("buckets").get<std::vector<int>>();
        cfg.corpus_dir = root.at("corpus_dir").get<std::string>();
        cfg.corpus_pattern = root.value("corpus_pattern", std::string{"{lang}.json"});
        cfg.demo_source_path = root.value("demo_source_path", std::string{});
        cfg.buckets_dir = root.at("buckets_dir").get<std::string>();
        cfg.templates_path = root.at("templates_path").get<std::string>();
        cfg.localization_path = root.at("localization_path").get<std::string>();
        cfg.cache_dir = root.value("cache_dir", std::string{});
        cfg.output_dir = root.at("output_dir").get<std::string>();
        cfg.max_in_flight = root.value("max_in_flight", 4);
        cfg.fail_fast = root.value("fail_fast", false);
        cfg.separator = root.value("separator", std::string{"\n\n"});
        if (root.contains("decode")) {
            const json& d = root["decode"];
            cfg.decode.max_new_tokens = d.value("max_new_tokens", 32);
            cfg.decode.temperature = d.value("temperature", 0.0);
            if (d.contains("stop")) {
                cfg.decode.stop_sequences = d["stop"].get<std::vector<std::string>>();
            }
        }
        if (root.contains("retry")) {
            cfg.retry.max_attempts = root["retry"].value("max_attempts", 3);
            cfg.retry.backoff_ms = root["retry"].value("backoff_ms", 10);
        }
    } catch (const json::exception& e) {
        throw util::ConfigError("run config " + path + " is missing fields: " + e.what());
    }
    return cfg;
}

// Canonical serialization for the manifest's config digest.
inline json config_to_json(const RunConfig& cfg) {
    json models = json::array();
    for (const auto& m : cfg.models) {
        models.push_back(json{{"name", m.name},
                              {"family", m.family},
                              {"endpoint", m.endpoint},
                              {"host", m.host},
                              {"port", m.port},
                              {"path", m.path},
                              {"token_env", m.token_env}});
    }
    return json{{"models", models},
                {"task", corpus::to_string(cfg.task)},
                {"source_language", cfg.source_language},
                {"target_languages", cfg.target_languages},
                {"methods", cfg.methods},
                {"shots", cfg.shots},
                {"buckets", cfg.buckets},
                {"corpus_dir", cfg.corpus_dir},
                {"corpus_pattern", cfg.corpus_pattern},
                {"demo_source_path", cfg.demo_source_path},
                {"buckets_dir", cfg.buckets_dir},
                {"templates_path", cfg.templates_path},
                {"localization_path", cfg.localization_path},
                {"separator", cfg.separator},
                {"decode", cfg.decode.canonical()}};
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

struct GridCell {
    std::string model;
    std::string language;
    std::string method;
    int k = 0;
    int bucket = 0;

    std::string key(corpus::Task task) const {
        return model + "/" + corpus::to_string(task) + "/" + language + "/" + method +
               "/k=" + std::to_string(k) + "/b=" + std::to_string(bucket);
    }

    bool operator<(const GridCell& other) const {
        return std::tie(model, language, method, k, bucket) <
               std::tie(other.model, other.language, other.method, other.k, other.bucket);
    }
};

inline std::vector<GridCell> expand_grid(const RunConfig& cfg) {
    std::vector<GridCell> cells;
    for (const auto& model : cfg.models) {
        for (const auto& language : cfg.target_languages) {
            for (const auto& method : cfg.methods) {
                for (int k : cfg.shots) {
                    for (int bucket : cfg.buckets) {
                        cells.push_back({model.name, language, method, k, bucket});
                    }
                }
            }
        }
    }
    std::sort(cells.begin(), cells.end());
    return cells;
}

// ---------------------------------------------------------------------------
// Loaded resources
// ---------------------------------------------------------------------------

namespace detail {

inline std::string corpus_file(const RunConfig& cfg, const std::string& language) {
    std::string name = cfg.corpus_pattern;
    auto pos = name.find("{lang}");
    if (pos == std::string::npos) {
        throw util::ConfigError("corpus_pattern must contain {lang}: " + cfg.corpus_pattern);
    }
    name.replace(pos, 6, language);
    return (std::filesystem::path(cfg.corpus_dir) / name).string();
}

inline std::vector<corpus::Example> load_language_file(const RunConfig& cfg,
                                                       const std::string& path,
                                                       const std::string& language) {
    if (cfg.task == corpus::Task::qa) {
        return corpus::load_qa_dataset(path, cfg.qa_format, language);
    }
    return corpus::load_classification_dataset(path, cfg.task, language);
}

// The gold answers a prediction is scored against (and that the echo-gold
// mock replays): localized label verbalizations for classification tasks,
// the stored gold answers otherwise.
inline std::vector<std::string> golds_for(const corpus::Example& ex,
                                          const prompt::LocalizationTable& loc) {
    if (auto key = ex.extra("label_key")) {
        return {loc.resolve(ex.language, *key)};
    }
    return ex.gold_answers;
}

}  // namespace detail

// Everything run_eval resolves during pre-flight, before any endpoint call.
struct ResolvedResources {
    corpus::ParallelCorpus eval_corpus;                      // queries, incl. source language
    std::map<std::string, corpus::Example> demo_source;      // id -> source-language original
    std::map<std::string, std::vector<mt::Bucket>> buckets;  // language -> buckets
    std::map<corpus::Task, prompt::TaskTemplate> templates;
    prompt::LocalizationTable localization;
    std::map<std::string, std::string> input_digests;        // path -> sha256
};

inline ResolvedResources resolve_resources(const RunConfig& cfg) {
    ResolvedResources res;

    // Corpora (source + targets), aligned by id.
    std::map<std::string, std::vector<corpus::Example>> per_language;
    std::set<std::string> languages(cfg.target_languages.begin(), cfg.target_languages.end());
    languages.insert(cfg.source_language);
    for (const auto& language : languages) {
        std::string path = detail::corpus_file(cfg, language);
        if (!std::filesystem::exists(path)) {
            throw util::ConfigError("corpus file for '" + language + "' not found: " + path);
        }
        per_language[language] = detail::load_language_file(cfg, path, language);
        res.input_digests[path] = util::sha256_file(path);
    }
    res.eval_corpus = corpus::validate_parallelism(per_language).corpus;

    // Demonstration buckets per evaluated language.
    int max_k = *std::max_element(cfg.shots.begin(), cfg.shots.end());
    for (const auto& language : cfg.target_languages) {
        std::string path =
            (std::filesystem::path(cfg.buckets_dir) / ("buckets_" + language + ".jsonl")).string();
        if (!std::filesystem::exists(path)) {
            throw util::ConfigError("bucket file for '" + language + "' not found: " + path);
        }
        res.buckets[language] = mt::read_buckets_jsonl(path);
        res.input_digests[path] = util::sha256_file(path);
        for (int want : cfg.buckets) {
            auto it = std::find_if(res.buckets[language].begin(), res.buckets[language].end(),
                                   [&](const mt::Bucket& b) { return b.index == want; });
            if (it == res.buckets[language].end()) {
                throw util::ConfigError("bucket " + std::to_string(want) + " missing for '" +
                                        language + "' in " + path);
            }
            if (static_cast<int>(it->examples.size()) < max_k) {
                throw util::ConfigError("bucket " + std::to_string(want) + " for '" + language +
                                        "' holds " + std::to_string(it->examples.size()) +
                                        " examples but k=" + std::to_string(max_k) +
                                        " shots were requested");
            }
        }
    }

    // Source-language originals of the demonstrations, needed whenever a
    // method renders any attribute in the source language.
    bool needs_source = false;
    for (const auto& method : cfg.methods) {
        auto a = prompt::resolve_assignment(method);
        if (a.context_lang == prompt::Lang::src || a.question_lang == prompt::Lang::src ||
            a.answer_lang == prompt::Lang::src) {
            needs_source = true;
        }
    }
    if (needs_source && max_k > 0) {
        if (cfg.demo_source_path.empty()) {
            throw util::ConfigError(
                "methods with source-language attributes require demo_source_path");
        }
        if (!std::filesystem::exists(cfg.demo_source_path)) {
            throw util::ConfigError("demo_source_path not found: " + cfg.demo_source_path);
        }
        auto originals =
            detail::load_language_file(cfg, cfg.demo_source_path, cfg.source_language);
        res.input_digests[cfg.demo_source_path] = util::sha256_file(cfg.demo_source_path);
        for (auto& ex : originals) res.demo_source.emplace(ex.id, std::move(ex));
        for (const auto& [language, buckets] : res.buckets) {
            for (const auto& bucket : buckets) {
                for (const auto& ex : bucket.examples) {
                    if (!res.demo_source.count(ex.id)) {
                        throw util::ConfigError("demonstration id '" + ex.id + "' (language " +
                                                language + ") has no source-language original in " +
                                                cfg.demo_source_path);
                    }
                }
            }
        }
    }

    // Templates and localization.
    if (!std::filesystem::exists(cfg.templates_path)) {
        throw util::ConfigError("templates file not found: " + cfg.templates_path);
    }
    res.templates = prompt::load_templates(cfg.templates_path);
    res.input_digests[cfg.templates_path] = util::sha256_file(cfg.templates_path);
    if (!res.templates.count(cfg.task)) {
        throw util::ConfigError("no template for task '" + corpus::to_string(cfg.task) + "' in " +
                                cfg.templates_path);
    }
    if (!std::filesystem::exists(cfg.localization_path)) {
        throw util::ConfigError("localization file not found: " + cfg.localization_path);
    }
    res.localization = prompt::LocalizationTable::from_json_file(cfg.localization_path);
    res.input_digests[cfg.localization_path] = util::sha256_file(cfg.localization_path);

    // Every label the template can ask for must resolve in every language
    // involved, checked now so failures precede any network call.
    const prompt::TaskTemplate& tmpl = res.templates.at(cfg.task);
    for (const auto& language : languages) {
        for (const auto& line : tmpl.lines) {
            for (const auto& part : line.parts) {
                if (part.kind != prompt::TemplatePart::Kind::label) continue;
                if (part.value == "kind-question") {
                    res.localization.resolve(language, "cause-question");
                    res.localization.resolve(language, "effect-question");
                } else {
                    res.localization.resolve(language, part.value);
                }
            }
        }
        // Classification labels are re-verbalized per language at render and
        // scoring time.
        if (cfg.task == corpus::Task::paws_x) {
            res.localization.resolve(language, "yes");
            res.localization.resolve(language, "no");
        } else if (cfg.task == corpus::Task::xnli) {
            res.localization.resolve(language, "true");
            res.localization.resolve(language, "false");
            res.localization.resolve(language, "neither");
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// run_eval
// ---------------------------------------------------------------------------

struct BucketScoreRow {
    std::string model;
    std::string language;
    std::string method;
    int k = 0;
    int bucket = 0;
    double mean_f1 = 0.0;    // x100
    double mean_em = 0.0;    // x100
    int n_examples = 0;
};

struct RunResult {
    std::vector<metrics::ScoreRecord> scores;
    std::vector<BucketScoreRow> bucket_rows;
    std::vector<metrics::AggregateResult> aggregates_f1;
    std::vector<std::string> failed_cells;
    long endpoint_calls = 0;
    std::filesystem::path output_dir;
};

// Builds one completion client per model spec. The echo-gold mock answers
// from the gold table of the evaluation corpus; http speaks to a real
// endpoint. Every client is wrapped in a concurrency probe so the runner
// can report how many endpoint calls the run actually made (zero on a fully
// warm cache).
inline std::shared_ptr<infer::ConcurrencyProbeClient> make_client(
    const ModelSpec& spec, const ResolvedResources& res, const RunConfig& cfg) {
    std::shared_ptr<infer::CompletionClient> base;
    if (spec.endpoint == "echo-gold") {
        std::map<std::string, std::string> answers;
        for (const auto& [language, examples] : res.eval_corpus.by_language) {
            for (const auto& ex : examples) {
                if (ex.question.empty()) continue;
                answers[ex.question] = detail::golds_for(ex, res.localization).front();
            }
        }
        base = std::make_shared<infer::EchoGoldClient>(std::move(answers));
    } else if (spec.endpoint == "http") {
        infer::GenerationEndpoint endpoint;
        endpoint.model_id = spec.name;
        endpoint.host = spec.host;
        endpoint.port = spec.port;
        endpoint.path = spec.path;
        endpoint.token_env = spec.token_env;
        base = std::make_shared<infer::HttpCompletionClient>(endpoint);
    } else {
        throw util::ConfigError("unknown endpoint kind '" + spec.endpoint + "' for model " +
                                spec.name);
    }
    (void)cfg;
    return std::make_shared<infer::ConcurrencyProbeClient>(std::move(base));
}

inline RunResult run_eval(const RunConfig& cfg) {
    cfg.validate();
    ResolvedResources res = resolve_resources(cfg);
    std::vector<GridCell> cells = expand_grid(cfg);

    std::optional<infer::DiskCache> cache;
    if (!cfg.cache_dir.empty()) cache.emplace(cfg.cache_dir);

    RunResult result;
    result.output_dir = cfg.output_dir;
    std::filesystem::create_directories(cfg.output_dir);

    const prompt::TaskTemplate& tmpl = res.templates.at(cfg.task);
    std::string generations_jsonl;

    std::map<std::string, std::shared_ptr<infer::ConcurrencyProbeClient>> clients;
    for (const auto& model : cfg.models) {
        clients[model.name] = make_client(model, res, cfg);
    }

    for (const GridCell& cell : cells) {
        try {
            const std::vector<corpus::Example>& queries =
                res.eval_corpus.by_language.at(cell.language);
            const auto& language_buckets = res.buckets.at(cell.language);
            auto bit = std::find_if(language_buckets.begin(), language_buckets.end(),
                                    [&](const mt::Bucket& b) { return b.index == cell.bucket; });
            const mt::Bucket& bucket = *bit;

            prompt::LanguagePair languages{cfg.source_language, cell.language};
            std::vector<prompt::DemoPair> demos;
            demos.reserve(bucket.examples.size());
            for (const auto& demo : bucket.examples) {
                const corpus::Example* src = nullptr;
                auto sit = res.demo_source.find(demo.id);
                if (sit != res.demo_source.end()) src = &sit->second;
                demos.push_back({src, &demo});
            }

            std::vector<infer::BatchRequest> requests;
            requests.reserve(queries.size());
            for (const auto& query : queries) {
                requests.push_back({prompt::build_prompt(cell.method, demos, query, cell.k, tmpl,
                                                         res.localization, languages,
                                                         {cfg.separator}),
                                    cfg.decode});
            }

            infer::ConcurrencyProbeClient& client = *clients.at(cell.model);
            auto batch =
                infer::run_batch(requests, client, cell.model, cfg.max_in_flight,
                                 cache ? &*cache : nullptr, cfg.retry, cfg.fail_fast);

            std::vector<metrics::ScoreRecord> cell_scores;
            for (std::size_t i = 0; i < queries.size(); ++i) {
                if (!batch[i].record.has_value()) {
                    result.failed_cells.push_back(cell.key(cfg.task) + "#" + queries[i].id + ": " +
                                                  batch[i].error);
                    continue;
                }
                const infer::GenerationRecord& rec = *batch[i].record;
                std::vector<std::string> golds = detail::golds_for(queries[i], res.localization);
                metrics::ScoreRecord score;
                score.id = queries[i].id;
                score.f1 = metrics::f1(rec.parsed_answer, golds, cell.language);
                score.exact_match = metrics::exact_match(rec.parsed_answer, golds, cell.language);
                score.language = cell.language;
                score.method = cell.method;
                score.k = cell.k;
                score.bucket = cell.bucket;
                score.model = cell.model;
                cell_scores.push_back(score);
                generations_jsonl +=
                    infer::record_to_json(rec, /*volatile_fields=*/false).dump() + "\n";
            }
            if (cell_scores.empty()) {
                result.failed_cells.push_back(cell.key(cfg.task) + ": no scorable generations");
                continue;
            }

            BucketScoreRow row;
            row.model = cell.model;
            row.language = cell.language;
            row.method = cell.method;
            row.k = cell.k;
            row.bucket = cell.bucket;
            row.n_examples = static_cast<int>(cell_scores.size());
            double sum_f1 = 0.0, sum_em = 0.0;
            for (const auto& s : cell_scores) {
                sum_f1 += s.f1;
                sum_em += s.exact_match;
            }
            row.mean_f1 = sum_f1 / cell_scores.size() * 100.0;
            row.mean_em = sum_em / cell_scores.size() * 100.0;
            result.bucket_rows.push_back(row);
            result.scores.insert(result.scores.end(), cell_scores.begin(), cell_scores.end());
        } catch (const std::exception& e) {
            result.failed_cells.push_back(cell.key(cfg.task) + ": " + e.what());
        }
    }

    // Aggregate bucket rows into grid-cell groups (collapse the bucket axis).
    std::map<std::tuple<std::string, std::string, std::string, int>,
             std::vector<const BucketScoreRow*>>
        groups;
    for (const auto& row : result.bucket_rows) {
        groups[{row.model, row.language, row.method, row.k}].push_back(&row);
    }
    for (const auto& [key, rows] : groups) {
        std::vector<std::vector<double>> per_bucket;
        per_bucket.reserve(rows.size());
        for (const auto* row : rows) per_bucket.push_back({row->mean_f1 / 100.0});
        metrics::AggregateResult agg = metrics::aggregate_bucket_scores(per_bucket);
        agg.model = std::get<0>(key);
        agg.task = corpus::to_string(cfg.task);
        agg.language = std::get<1>(key);
        agg.method = std::get<2>(key);
        agg.k = std::get<3>(key);
        result.aggregates_f1.push_back(agg);
    }

    for (const auto& [name, client] : clients) {
        result.endpoint_calls += client->calls();
    }

    // ----- outputs ---------------------------------------------------------
    std::string scores_jsonl;
    for (const auto& s : result.scores) scores_jsonl += metrics::score_to_json(s).dump() + "\n";
    util::write_text_file_atomic(std::filesystem::path(cfg.output_dir) / "scores.jsonl",
                                 scores_jsonl);
    util::write_text_file_atomic(std::filesystem::path(cfg.output_dir) / "generations.jsonl",
                                 generations_jsonl);

    std::string bucket_tsv = "model\tlanguage\tmethod\tk\tbucket\tmean_f1\tmean_em\tn\n";
    for (const auto& row : result.bucket_rows) {
        bucket_tsv += row.model + "\t" + row.language + "\t" + row.method + "\t" +
                      std::to_string(row.k) + "\t" + std::to_string(row.bucket) + "\t" +
                      util::fmt_fixed(row.mean_f1, 4) + "\t" + util::fmt_fixed(row.mean_em, 4) +
                      "\t" + std::to_string(row.n_examples) + "\n";
    }
    util::write_text_file_atomic(std::filesystem::path(cfg.output_dir) / "bucket_scores.tsv",
                                 bucket_tsv);
    util::write_text_file_atomic(std::filesystem::path(cfg.output_dir) / "aggregates.tsv",
                                 report::render_aggregate_rows(result.aggregates_f1));

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["config_digest"] = util::sha256_hex(config_to_json(cfg).dump());
    json digests = json::object();
    for (const auto& [path, digest] : res.input_digests) digests[path] = digest;
    manifest["input_digests"] = digests;
    json grid = json::array();
    for (const auto& cell : cells) grid.push_back(cell.key(cfg.task));
    manifest["grid"] = grid;
    manifest["failed_cells"] = result.failed_cells;
    util::write_text_file_atomic(std::filesystem::path(cfg.output_dir) / "manifest.json",
                                 manifest.dump(1) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// emit_report
// ---------------------------------------------------------------------------

// Renders the table outputs for a completed run directory. Every grid cell
// group recorded in the manifest must have an aggregate row; missing cells
// are an error listing what is absent.
inline void emit_report(const std::string& run_dir) {
    namespace fs = std::filesystem;
    fs::path dir(run_dir);
    if (!fs::exists(dir / "manifest.json")) {
        throw util::DataError("run directory lacks manifest.json: " + run_dir);
    }
    if (!fs::exists(dir / "aggregates.tsv")) {
        throw util::DataError("run directory lacks aggregates.tsv: " + run_dir);
    }
    json manifest = json::parse(util::read_text_file(dir / "manifest.json"));

    // Parse aggregates.tsv back into records.
    std::vector<metrics::AggregateResult> aggregates;
    std::vector<std::string> lines = util::read_lines(dir / "aggregates.tsv");
    for (std::size_t i = 1; i < lines.size(); ++i) {  // skip header
        if (lines[i].empty()) continue;
        auto cols = util::split(lines[i], '\t');
        if (cols.size() != 9) {
            throw util::DataError("aggregates.tsv row " + std::to_string(i + 1) +
                                  " is not 9 columns");
        }
        metrics::AggregateResult agg;
        agg.model = cols[0];
        agg.task = cols[1];
        agg.language = cols[2];
        agg.method = cols[3];
        agg.k = std::stoi(cols[4]);
        agg.mean = std::stod(cols[5]);
        agg.stddev = std::stod(cols[6]);
        agg.stderror = std::stod(cols[7]);
        agg.n_buckets = std::stoi(cols[8]);
        aggregates.push_back(std::move(agg));
    }

    // Expected aggregate groups = manifest grid cells minus the bucket axis.
    std::set<std::string> expected;
    for (const auto& cell : manifest.at("grid")) {
        std::string key = cell.get<std::string>();
        auto pos = key.rfind("/b=");
        if (pos != std::string::npos) key = key.substr(0, pos);
        expected.insert(key);
    }
    std::set<std::string> failed_prefixes;
    for (const auto& failed : manifest.value("failed_cells", std::vector<std::string>{})) {
        auto pos = failed.rfind("/b=");
        if (pos != std::string::npos) failed_prefixes.insert(failed.substr(0, pos));
    }
    std::set<std::string> present;
    for (const auto& agg : aggregates) {
        present.insert(agg.model + "/" + agg.task + "/" + agg.language + "/" + agg.method +
                       "/k=" + std::to_string(agg.k));
    }
    std::vector<std::string> missing;
    for (const auto& key : expected) {
        if (!present.count(key) && !failed_prefixes.count(key)) missing.push_back(key);
    }
    if (!missing.empty()) {
        throw util::DataError("emit_report: aggregates missing for " +
                              std::to_string(missing.size()) + " grid cell group(s): " +
                              util::join(missing, ", "));
    }

    util::write_text_file_atomic(dir / "score_table.tsv", report::render_score_table(aggregates));
}

}  // namespace clteval::runner
