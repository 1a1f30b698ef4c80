// clteval — command-line front end for the cross-lingual in-context
// evaluation toolkit.
//
//   clteval pipeline ...   build parallel demonstration buckets (MT + QE)
//   clteval eval ...       run a prompt grid against a completion endpoint
//   clteval report ...     re-derive report tables from a finished run
//   clteval analyze ...    transfer-gap tables and correlation scatter
//
// Authentication tokens are taken from the environment, never from flags:
// CLTEVAL_MT_TOKEN for the translation endpoint, CLTEVAL_GEN_TOKEN for the
// completion endpoint.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clteval/clteval.hpp"

namespace fs = std::filesystem;
using namespace clteval;

namespace {

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

struct PipelineArgs {
    std::string train;
    std::string task = "qa";
    std::string format = "squad-v1";
    std::string source = "en";
    std::vector<std::string> targets;
    std::string mock;
    std::string endpoint_host;
    int endpoint_port = 80;
    std::string endpoint_path = "/translate";
    double threshold = 50.0;
    int buckets = 5;
    int bucket_size = 10;
    std::uint64_t seed = 0;
    int max_order = 4;
    bool score_against_trans1 = false;
    int max_in_flight = 4;
    std::string out;
    bool dry_run = false;
};

std::unique_ptr<mt::MtClient> make_translator(const PipelineArgs& args) {
    if (!args.mock.empty() && !args.endpoint_host.empty()) {
        throw util::ConfigError("--mock and --endpoint-host are mutually exclusive");
    }
    if (!args.mock.empty()) {
        if (args.mock == "identity") return std::make_unique<mt::IdentityTranslator>();
        if (args.mock == "tagging") return std::make_unique<mt::TaggingTranslator>();
        if (args.mock == "drop-clause") {
            return std::make_unique<mt::ClauseDroppingTranslator>(args.source);
        }
        if (args.mock == "scramble") return std::make_unique<mt::TokenPermutingTranslator>();
        if (args.mock.rfind("corrupt:", 0) == 0) {
            int severity = 0;
            try {
                severity = std::stoi(args.mock.substr(8));
            } catch (const std::exception&) {
                throw util::ConfigError("corrupt:N needs an integer severity, got '" + args.mock +
                                        "'");
            }
            return std::make_unique<mt::CorruptingTranslator>(severity);
        }
        throw util::ConfigError(
            "unknown mock translator '" + args.mock +
            "' (expected identity, tagging, drop-clause, scramble, or corrupt:N)");
    }
    if (args.endpoint_host.empty()) {
        throw util::ConfigError("pipeline needs either --mock or --endpoint-host");
    }
    mt::MtEndpoint endpoint;
    endpoint.host = args.endpoint_host;
    endpoint.port = args.endpoint_port;
    endpoint.path = args.endpoint_path;
    return std::make_unique<mt::HttpMtClient>(endpoint);
}

int cmd_pipeline(const PipelineArgs& args) {
    corpus::Task task = corpus::task_from_string(args.task);
    std::vector<corpus::Example> pool;
    if (task == corpus::Task::qa) {
        pool = corpus::load_qa_dataset(args.train, corpus::qa_format_from_string(args.format),
                                       args.source);
    } else {
        pool = corpus::load_classification_dataset(args.train, task, args.source);
    }

    mt::PipelineConfig cfg;
    cfg.bleu_threshold = args.threshold;
    cfg.bucket_count = args.buckets;
    cfg.bucket_size = args.bucket_size;
    cfg.rng_seed = args.seed;
    cfg.max_ngram_order = args.max_order;
    cfg.score_against_trans1 = args.score_against_trans1;
    cfg.max_in_flight = args.max_in_flight;
    cfg.validate();

    std::printf("pipeline: %zu '%s' examples from %s\n", pool.size(), args.task.c_str(),
                args.train.c_str());
    std::printf("  source %s -> targets", args.source.c_str());
    for (const auto& t : args.targets) std::printf(" %s", t.c_str());
    std::printf("\n  threshold %.1f, %d buckets x %d, seed %llu\n", args.threshold, args.buckets,
                args.bucket_size, static_cast<unsigned long long>(args.seed));
    if (args.dry_run) {
        std::printf("  dry run: no translation calls made\n");
        return 0;
    }

    std::unique_ptr<mt::MtClient> translator = make_translator(args);
    fs::create_directories(args.out);

    // Stage 1: per-target quality estimation. Each target keeps its accepted
    // translations; rejections are logged per target.
    std::map<std::string, std::vector<corpus::Example>> accepted_pools;
    std::vector<std::string> drop_lines;  // language \t id \t rule \t detail
    for (const auto& target : args.targets) {
        if (target == args.source) {
            throw util::ConfigError("target '" + target + "' equals the source language");
        }
        auto outcomes = mt::run_quality_stage(pool, args.source, target, *translator, cfg);
        std::string qe = "id\tcontext_bleu\tquestion_bleu\taccepted\n";
        std::size_t kept = 0;
        for (auto& outcome : outcomes) {
            qe += outcome.record.id + "\t" + util::fmt_fixed(outcome.record.context_rtt.bleu, 2) +
                  "\t" + util::fmt_fixed(outcome.record.question_rtt.bleu, 2) + "\t" +
                  (outcome.accepted ? "yes" : "no") + "\n";
            if (outcome.accepted) {
                accepted_pools[target].push_back(std::move(outcome.translated));
                ++kept;
            } else {
                drop_lines.push_back(target + "\t" + outcome.record.id + "\tquality-gate\t" +
                                     "round-trip BLEU below " +
                                     util::fmt_fixed(args.threshold, 1));
            }
        }
        util::write_text_file_atomic((fs::path(args.out) / ("qe_" + target + ".tsv")).string(),
                                     qe);
        std::printf("  %s: %zu/%zu accepted by the quality gate\n", target.c_str(), kept,
                    outcomes.size());
        if (accepted_pools[target].empty()) {
            throw util::PipelineError("quality gate rejected every '" + target +
                                      "' translation; lower --threshold or fix the translator");
        }
    }

    // Stage 2: id alignment across the source and every target.
    std::map<std::string, std::vector<corpus::Example>> per_language = accepted_pools;
    per_language[args.source] = pool;
    corpus::ParallelismResult parallel = corpus::validate_parallelism(per_language);
    for (const auto& drop : parallel.drops) {
        drop_lines.push_back("-\t" + drop.id + "\t" + drop.rule + "\t" + drop.detail);
    }

    // Stage 3: content filters per language, then a final id intersection so
    // every language carries exactly the same candidates into bucketing.
    std::map<std::string, std::vector<corpus::Example>> filtered;
    std::set<std::string> survivors;
    bool first = true;
    for (const auto& [language, examples] : parallel.corpus.by_language) {
        mt::FilterResult result = mt::filter_candidates(examples, parallel.corpus);
        for (const auto& drop : result.drops) {
            drop_lines.push_back(language + "\t" + drop.id + "\t" + drop.rule + "\t" + drop.detail);
        }
        std::set<std::string> ids;
        for (const auto& ex : result.kept) ids.insert(ex.id);
        if (first) {
            survivors = std::move(ids);
            first = false;
        } else {
            std::set<std::string> both;
            for (const auto& id : survivors) {
                if (ids.count(id)) both.insert(id);
            }
            survivors = std::move(both);
        }
        filtered[language] = std::move(result.kept);
    }
    for (auto& [language, examples] : filtered) {
        std::vector<corpus::Example> kept;
        for (auto& ex : examples) {
            if (survivors.count(ex.id)) kept.push_back(std::move(ex));
        }
        examples = std::move(kept);
    }
    std::printf("  %zu candidates survive alignment and filtering\n", survivors.size());

    // Stage 4: parallel buckets, decided on the source pool and projected
    // onto every target.
    std::vector<corpus::Example> source_pool = std::move(filtered[args.source]);
    filtered.erase(args.source);
    auto buckets = mt::build_parallel_buckets(source_pool, filtered, cfg);
    for (const auto& [language, bucket_vec] : buckets) {
        std::string path = (fs::path(args.out) / ("buckets_" + language + ".jsonl")).string();
        mt::write_buckets_jsonl(path, bucket_vec);
        std::printf("  wrote %s\n", path.c_str());
    }

    std::string drops = "language\tid\trule\tdetail\n";
    for (const auto& line : drop_lines) drops += line + "\n";
    util::write_text_file_atomic((fs::path(args.out) / "drops.tsv").string(), drops);
    std::printf("  wrote %s (%zu drops)\n", (fs::path(args.out) / "drops.tsv").string().c_str(),
                drop_lines.size());
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& config_path, bool dry_run) {
    runner::RunConfig cfg = runner::parse_run_config(config_path);
    cfg.validate();
    std::vector<runner::GridCell> grid = runner::expand_grid(cfg);
    std::printf("eval: %zu grid cells from %s\n", grid.size(), config_path.c_str());
    if (dry_run) {
        runner::ResolvedResources res = runner::resolve_resources(cfg);
        std::printf("  resources resolved: %zu input files digested\n",
                    res.input_digests.size());
        for (const auto& cell : grid) std::printf("  %s\n", cell.key(cfg.task).c_str());
        std::printf("  dry run: no endpoint calls made\n");
        return 0;
    }
    runner::RunResult result = runner::run_eval(cfg);
    std::printf("  %zu scores, %zu bucket rows, %zu aggregates, %ld endpoint calls\n",
                result.scores.size(), result.bucket_rows.size(), result.aggregates_f1.size(),
                result.endpoint_calls);
    std::printf("  artifacts in %s\n", result.output_dir.string().c_str());
    if (!result.failed_cells.empty()) {
        std::fprintf(stderr, "  %zu grid cells FAILED:\n", result.failed_cells.size());
        for (const auto& cell : result.failed_cells) {
            std::fprintf(stderr, "    %s\n", cell.c_str());
        }
        return 1;
    }
    std::printf("  next: clteval report --run %s\n", result.output_dir.string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& run_dir) {
    runner::emit_report(run_dir);
    std::printf("report: wrote %s\n", (fs::path(run_dir) / "score_table.tsv").string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string fewshot;
    std::vector<std::string> profiles;  // family=path
    std::string proximity;
    std::string model;
    std::string family;
    int k = 5;
    std::vector<std::string> targets = {"ar", "de", "el", "es", "hi", "ro",
                                        "ru", "th", "tr", "vi", "zh"};
    std::vector<std::string> methods;  // default: every known method
    std::string baseline_language = "en";
    std::string correlate;  // "", "proximity", or "proportion"
    std::string correlate_method = "IN_CLT_TGT_A";
    std::string correlate_group = "unseen";
    std::vector<std::string> exclude;
    std::string out;
};

int cmd_analyze(const AnalyzeArgs& args) {
    analysis::ProfileRegistry registry;
    for (const auto& spec : args.profiles) {
        auto pos = spec.find('=');
        if (pos == std::string::npos || pos == 0 || pos + 1 == spec.size()) {
            throw util::ConfigError("--profiles expects family=path, got '" + spec + "'");
        }
        analysis::load_corpus_table(spec.substr(pos + 1), spec.substr(0, pos), registry);
    }
    if (!args.proximity.empty()) {
        analysis::load_proximity_table(args.proximity, registry);
    }

    analysis::FewshotTable table{analysis::load_fewshot_table(args.fewshot)};
    std::set<std::string> targets(args.targets.begin(), args.targets.end());
    analysis::LanguageGroups groups = analysis::group_languages(registry, args.family, targets);
    std::printf("analyze: family '%s' — %zu seen, %zu unseen of %zu targets\n",
                args.family.c_str(), groups.seen.size(), groups.unseen.size(), targets.size());

    auto en_mono = table.mean_of(args.model, "MONO", args.k, args.baseline_language);
    if (!en_mono.has_value()) {
        throw util::ConfigError("few-shot table lacks the " + args.baseline_language +
                                " MONO baseline for " + args.model + " at k=" +
                                std::to_string(args.k));
    }

    // Default method set: every known method the table fully covers at this
    // model/k (result tables often omit ablations). An explicit --methods
    // list is taken verbatim and missing rows fail loudly.
    std::vector<std::string> methods = args.methods;
    if (methods.empty()) {
        for (const auto& method : prompt::method_names()) {
            bool complete = true;
            for (const auto& language : targets) {
                if (!table.mean_of(args.model, method, args.k, language).has_value()) {
                    complete = false;
                    break;
                }
            }
            if (complete) {
                methods.push_back(method);
            } else {
                std::printf("  (skipping %s: incomplete row coverage at k=%d)\n", method.c_str(),
                            args.k);
            }
        }
        if (methods.empty()) {
            throw util::ConfigError("no method has complete row coverage for " + args.model +
                                    " at k=" + std::to_string(args.k));
        }
    }
    std::vector<analysis::TransferGapRecord> records;
    for (const auto& method : methods) {
        for (const auto& [label, group] :
             std::map<std::string, const std::set<std::string>*>{{"seen", &groups.seen},
                                                                 {"unseen", &groups.unseen}}) {
            if (group->empty()) continue;
            records.push_back(analysis::transfer_gap(
                *en_mono, table.means_of(args.model, method, args.k, *group), args.model, method,
                label));
        }
    }
    std::string gap_table = report::render_gap_table(records);
    fs::create_directories(args.out);
    util::write_text_file_atomic((fs::path(args.out) / "gaps.tsv").string(), gap_table);
    std::fputs(gap_table.c_str(), stdout);
    std::printf("analyze: wrote %s\n", (fs::path(args.out) / "gaps.tsv").string().c_str());

    if (args.correlate.empty()) return 0;

    analysis::CorrelationX x_kind;
    if (args.correlate == "proximity") {
        x_kind = analysis::CorrelationX::proximity;
    } else if (args.correlate == "proportion") {
        x_kind = analysis::CorrelationX::proportion;
    } else {
        throw util::ConfigError("--correlate must be proximity or proportion, got '" +
                                args.correlate + "'");
    }
    const std::set<std::string>* group = nullptr;
    std::set<std::string> all;
    if (args.correlate_group == "seen") {
        group = &groups.seen;
    } else if (args.correlate_group == "unseen") {
        group = &groups.unseen;
    } else if (args.correlate_group == "all") {
        all = targets;
        group = &all;
    } else {
        throw util::ConfigError("--correlate-group must be seen, unseen, or all");
    }
    std::map<std::string, double> gaps;
    for (const auto& language : *group) {
        auto mean = table.mean_of(args.model, args.correlate_method, args.k, language);
        if (!mean.has_value()) {
            throw util::ConfigError("few-shot table lacks a row for " + args.model + "/" +
                                    args.correlate_method + "/k=" + std::to_string(args.k) + "/" +
                                    language);
        }
        gaps[language] = *en_mono - *mean;
    }
    std::set<std::string> exclusions(args.exclude.begin(), args.exclude.end());
    analysis::CorrelationReport corr =
        analysis::correlation_report(gaps, registry, x_kind, args.family, exclusions);
    util::write_text_file_atomic((fs::path(args.out) / "scatter.tsv").string(),
                                 report::render_scatter_tsv(corr));
    util::write_text_file_atomic((fs::path(args.out) / "scatter.svg").string(),
                                 report::render_scatter_svg(corr));
    std::printf("analyze: r = %.4f over %zu languages (%s vs transfer gap); wrote %s\n", corr.r,
                corr.pairs.size(), args.correlate.c_str(),
                (fs::path(args.out) / "scatter.svg").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-lingual in-context evaluation toolkit"};
    app.require_subcommand(1);

    PipelineArgs pipeline_args;
    CLI::App* pipeline = app.add_subcommand(
        "pipeline", "build parallel demonstration buckets through MT and quality estimation");
    pipeline->add_option("--train", pipeline_args.train, "source-language training pool")
        ->required();
    pipeline->add_option("--task", pipeline_args.task, "qa | paws-x | xnli | xcopa");
    pipeline->add_option("--format", pipeline_args.format,
                         "QA file format: squad-v1 | mlqa | xquad");
    pipeline->add_option("--source", pipeline_args.source, "source language (default en)");
    pipeline->add_option("--targets", pipeline_args.targets, "target languages")
        ->required()
        ->delimiter(',');
    pipeline->add_option("--mock", pipeline_args.mock,
                         "offline translator: identity | tagging | drop-clause | scramble | "
                         "corrupt:N");
    pipeline->add_option("--endpoint-host", pipeline_args.endpoint_host,
                         "translation endpoint host (token from CLTEVAL_MT_TOKEN)");
    pipeline->add_option("--endpoint-port", pipeline_args.endpoint_port, "endpoint port");
    pipeline->add_option("--endpoint-path", pipeline_args.endpoint_path, "endpoint POST path");
    pipeline->add_option("--threshold", pipeline_args.threshold,
                         "round-trip BLEU acceptance threshold (0-100)");
    pipeline->add_option("--buckets", pipeline_args.buckets, "number of buckets B");
    pipeline->add_option("--bucket-size", pipeline_args.bucket_size, "examples per bucket S");
    pipeline->add_option("--seed", pipeline_args.seed, "bucket shuffle seed");
    pipeline->add_option("--max-order", pipeline_args.max_order, "BLEU n-gram order");
    pipeline->add_flag("--score-against-trans1", pipeline_args.score_against_trans1,
                       "score the back-translation against the forward leg instead of the "
                       "original");
    pipeline->add_option("--max-in-flight", pipeline_args.max_in_flight,
                         "concurrent translation calls");
    pipeline->add_option("--out", pipeline_args.out, "output directory")->required();
    pipeline->add_flag("--dry-run", pipeline_args.dry_run, "print the plan and exit");

    std::string eval_config;
    bool eval_dry_run = false;
    CLI::App* eval = app.add_subcommand("eval", "run an evaluation grid from a JSON run config "
                                                "(endpoint token from CLTEVAL_GEN_TOKEN)");
    eval->add_option("--config", eval_config, "run configuration JSON")->required();
    eval->add_flag("--dry-run", eval_dry_run,
                   "validate, resolve resources, print the grid; no endpoint calls");

    std::string report_run;
    CLI::App* report_cmd =
        app.add_subcommand("report", "re-derive report tables from a finished run directory");
    report_cmd->add_option("--run", report_run, "run directory with manifest and aggregates")
        ->required();

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "transfer-gap tables and correlation scatter from result tables");
    analyze->add_option("--fewshot", analyze_args.fewshot, "few-shot result table (TSV)")
        ->required();
    analyze->add_option("--profiles", analyze_args.profiles,
                        "pre-training corpus table as family=path (repeatable)")
        ->required();
    analyze->add_option("--proximity", analyze_args.proximity,
                        "language-proximity table (values filled in by hand)");
    analyze->add_option("--model", analyze_args.model, "model name as it appears in the table")
        ->required();
    analyze->add_option("--family", analyze_args.family, "model family for seen/unseen grouping")
        ->required();
    analyze->add_option("--k", analyze_args.k, "shot count to analyze");
    analyze->add_option("--targets", analyze_args.targets, "target languages")->delimiter(',');
    analyze->add_option("--methods", analyze_args.methods,
                        "prompting methods to tabulate (default: all)")
        ->delimiter(',');
    analyze->add_option("--baseline-language", analyze_args.baseline_language,
                        "monolingual baseline language");
    analyze->add_option("--correlate", analyze_args.correlate,
                        "draw a scatter against: proximity | proportion");
    analyze->add_option("--correlate-method", analyze_args.correlate_method,
                        "method whose gaps feed the scatter");
    analyze->add_option("--correlate-group", analyze_args.correlate_group,
                        "seen | unseen | all");
    analyze->add_option("--exclude", analyze_args.exclude, "languages to exclude from the scatter")
        ->delimiter(',');
    analyze->add_option("--out", analyze_args.out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pipeline->parsed()) return cmd_pipeline(pipeline_args);
        if (eval->parsed()) return cmd_eval(eval_config, eval_dry_run);
        if (report_cmd->parsed()) return cmd_report(report_run);
        if (analyze->parsed()) return cmd_analyze(analyze_args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
