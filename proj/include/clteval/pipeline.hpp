#pragma once

// Parallel-demonstration construction: round-trip translation, BLEU-based
// quality estimation, candidate filtering, and seeded bucketing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clteval/corpus.hpp"
#include "clteval/mt_client.hpp"
#include "clteval/text.hpp"
#include "clteval/util.hpp"

namespace clteval::mt {

using corpus::Drop;
using corpus::DropReport;
using corpus::Example;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Smoothing {
    none,          // raw clipped precisions
    add_one_geq2,  // when any precision is zero, add 1 to numerator and
                   // denominator of every order >= 2 (order 1 untouched)
};

inline Smoothing smoothing_from_string(std::string_view s) {
    if (s == "none") return Smoothing::none;
    if (s == "add-one") return Smoothing::add_one_geq2;
    throw util::ConfigError("unknown smoothing rule: " + std::string(s));
}

struct PipelineConfig {
    double bleu_threshold = 50.0;  // accept round trips scoring >= this
    int bucket_count = 5;          // B
    int bucket_size = 10;          // S
    std::uint64_t rng_seed = 0;
    int max_ngram_order = 4;
    Smoothing smoothing = Smoothing::add_one_geq2;
    // The conventional round-trip gate scores trans2 against the original.
    // Scoring trans2 against trans1 (texts in two different languages) is
    // kept behind this flag for fidelity experiments.
    bool score_against_trans1 = false;
    util::RetryPolicy retry;
    int max_in_flight = 4;

    void validate() const {
        if (bleu_threshold < 0.0 || bleu_threshold > 100.0) {
            throw util::ConfigError("bleu_threshold must lie in [0,100]");
        }
        if (bucket_count <= 0 || bucket_size <= 0) {
            throw util::ConfigError("bucket_count and bucket_size must be positive");
        }
        if (max_ngram_order < 1) {
            throw util::ConfigError("max_ngram_order must be >= 1");
        }
        if (max_in_flight < 1) {
            throw util::ConfigError("max_in_flight must be >= 1");
        }
    }
};

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

namespace detail {

// n-gram multiset counts, keyed by tokens joined with an unlikely separator.
inline std::unordered_map<std::string, long> ngram_counts(const std::vector<std::string>& tokens,
                                                          int n) {
    std::unordered_map<std::string, long> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (int j = 0; j < n; ++j) {
            if (j) key += '\x1e';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace detail

// Sentence BLEU on [0,100]: geometric mean of clipped n-gram precisions up
// to order min(max_ngram_order, candidate length), times the brevity
// penalty. Empty-after-tokenization input scores 0 with a warning rather
// than raising.
inline double bleu_score(std::string_view candidate, std::string_view reference,
                         const PipelineConfig& cfg = {}) {
    std::vector<std::string> cand = text::tokenize_script(candidate);
    std::vector<std::string> ref = text::tokenize_script(reference);
    if (cand.empty() || ref.empty()) {
        std::cerr << "[clteval] warning: BLEU input empty after tokenization; scoring 0\n";
        return 0.0;
    }
    int n_max = std::min<int>(cfg.max_ngram_order, static_cast<int>(cand.size()));
    std::vector<long> numer(n_max, 0), denom(n_max, 0);
    for (int n = 1; n <= n_max; ++n) {
        auto cand_counts = detail::ngram_counts(cand, n);
        auto ref_counts = detail::ngram_counts(ref, n);
        long clipped = 0;
        for (const auto& [gram, count] : cand_counts) {
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) clipped += std::min(count, it->second);
        }
        numer[n - 1] = clipped;
        denom[n - 1] = static_cast<long>(cand.size()) - n + 1;
    }
    bool any_zero = std::any_of(numer.begin(), numer.end(), [](long v) { return v == 0; });
    if (cfg.smoothing == Smoothing::add_one_geq2 && any_zero) {
        for (int i = 1; i < n_max; ++i) {
            ++numer[i];
            ++denom[i];
        }
    }
    double log_sum = 0.0;
    for (int i = 0; i < n_max; ++i) {
        if (numer[i] == 0) return 0.0;  // a zero survives iff unsmoothable
        log_sum += std::log(static_cast<double>(numer[i]) / static_cast<double>(denom[i]));
    }
    double geo_mean = std::exp(log_sum / n_max);
    auto c = static_cast<double>(cand.size());
    auto r = static_cast<double>(ref.size());
    double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * geo_mean;
}

// ---------------------------------------------------------------------------
// Round-trip translation
// ---------------------------------------------------------------------------

// One round trip: original --(src->tgt)--> trans1 --(tgt->src)--> trans2,
// scored with BLEU.
struct RttRecord {
    std::string original;
    std::string trans1;
    std::string trans2;
    double bleu = 0.0;
};

inline RttRecord round_trip(const std::string& original, const std::string& source,
                            const std::string& target, MtClient& client,
                            const PipelineConfig& cfg = {}) {
    if (original.empty()) {
        throw util::DataError("round_trip: empty input text");
    }
    RttRecord rec;
    rec.original = original;
    rec.trans1 = util::with_retries(
        [&] { return client.translate(original, source, target); }, cfg.retry);
    rec.trans2 = util::with_retries(
        [&] { return client.translate(rec.trans1, target, source); }, cfg.retry);
    const std::string& reference = cfg.score_against_trans1 ? rec.trans1 : rec.original;
    rec.bleu = bleu_score(rec.trans2, reference, cfg);
    return rec;
}

// ---------------------------------------------------------------------------
// Quality estimation
// ---------------------------------------------------------------------------

// QE scores one candidate: context and question are round-tripped
// independently and the candidate is accepted iff both reach the threshold.
// Answers are translated (the bucket needs them) but not scored.
struct QualityRecord {
    std::string id;
    RttRecord context_rtt;
    RttRecord question_rtt;
    bool accepted = false;
};

struct QualityOutcome {
    Example translated;
    bool accepted = false;
    QualityRecord record;
};

inline QualityOutcome estimate_quality(const Example& example, const std::string& source,
                                       const std::string& target, MtClient& client,
                                       const PipelineConfig& cfg = {}) {
    if (example.language != source) {
        throw util::ConfigError("estimate_quality: example " + example.id + " is in '" +
                                example.language + "', expected source '" + source + "'");
    }
    QualityOutcome out;
    out.record.id = example.id;
    try {
        out.record.context_rtt = round_trip(example.context, source, target, client, cfg);
        if (!example.question.empty()) {
            out.record.question_rtt = round_trip(example.question, source, target, client, cfg);
        } else {
            // Tasks without a free-text question gate on context alone.
            out.record.question_rtt = RttRecord{"", "", "", 100.0};
        }
        out.translated = example;
        out.translated.language = target;
        out.translated.context = out.record.context_rtt.trans1;
        out.translated.question = out.record.question_rtt.trans1;
        out.translated.gold_answers.clear();
        for (const auto& gold : example.gold_answers) {
            out.translated.gold_answers.push_back(util::with_retries(
                [&] { return client.translate(gold, source, target); }, cfg.retry));
        }
        for (const char* choice : {"choice1", "choice2"}) {
            auto it = out.translated.extras.find(choice);
            if (it != out.translated.extras.end()) {
                it->second = util::with_retries(
                    [&] { return client.translate(it->second, source, target); }, cfg.retry);
            }
        }
    } catch (const util::TransportError& e) {
        throw util::PipelineError("quality estimation failed for item " + example.id + ": " +
                                  e.what());
    }
    out.record.accepted = out.record.context_rtt.bleu >= cfg.bleu_threshold &&
                          out.record.question_rtt.bleu >= cfg.bleu_threshold;
    out.accepted = out.record.accepted;
    return out;
}

// Runs QE over a pool with bounded concurrency. Items are processed in
// sorted-id order and results are returned in that order, so output is
// independent of scheduling.
inline std::vector<QualityOutcome> run_quality_stage(std::vector<Example> pool,
                                                     const std::string& source,
                                                     const std::string& target, MtClient& client,
                                                     const PipelineConfig& cfg = {}) {
    cfg.validate();
    std::sort(pool.begin(), pool.end(),
              [](const Example& a, const Example& b) { return a.id < b.id; });
    std::vector<QualityOutcome> results(pool.size());
    std::vector<std::string> errors(pool.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= pool.size()) return;
            try {
                results[i] = estimate_quality(pool[i], source, target, client, cfg);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight), pool.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!errors[i].empty()) {
            throw util::PipelineError("quality stage: " + errors[i]);
        }
    }
    return results;
}

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

namespace detail {

// Duplicate detection key for "the same question". Tasks whose question
// field is empty fall back to their distinguishing content.
inline std::string question_dedup_key(const Example& ex) {
    if (!ex.question.empty()) return text::dedup_key(ex.question);
    std::string key = ex.context;
    if (auto c1 = ex.extra("choice1")) key += "\n" + *c1;
    if (auto c2 = ex.extra("choice2")) key += "\n" + *c2;
    return text::dedup_key(key);
}

inline std::string context_dedup_key(const Example& ex) {
    return text::dedup_key(ex.context);
}

}  // namespace detail

struct FilterResult {
    std::vector<Example> kept;
    DropReport drops;
};

// Applies, in order: (1) the parallel-id check against the reference corpus,
// (2) the answer-in-context check (QA only; the demonstrated answer must
// occur verbatim in the context after NFC), and (3) duplicate-question
// removal, keep-first. Rule (4), duplicate contexts, is enforced per bucket
// at bucketing time. Total function: never throws on content.
inline FilterResult filter_candidates(const std::vector<Example>& pool,
                                      const corpus::ParallelCorpus& reference) {
    FilterResult result;
    std::set<std::string> seen_questions;
    for (const auto& ex : pool) {
        if (!reference.has_id(ex.id)) {
            result.drops.push_back({ex.id, "parallel-id", "id not present in all languages"});
            continue;
        }
        if (ex.task == corpus::Task::qa) {
            if (ex.gold_answers.empty() ||
                !text::contains_nfc(ex.context, ex.gold_answers.front())) {
                result.drops.push_back({ex.id, "answer-in-context",
                                        "demonstrated answer not found in context"});
                continue;
            }
        }
        std::string qkey = detail::question_dedup_key(ex);
        if (!seen_questions.insert(qkey).second) {
            result.drops.push_back({ex.id, "duplicate-question", "question seen earlier in pool"});
            continue;
        }
        result.kept.push_back(ex);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Bucketing
// ---------------------------------------------------------------------------

// A fixed-size set of demonstration examples for one language.
struct Bucket {
    std::string language;
    int index = 0;
    std::vector<Example> examples;
};

namespace detail {

// Explicit Fisher-Yates with modulo-bounded draws from mt19937_64. The draw
// rule is part of the artifact's determinism contract: standard-library
// shuffle and distribution types are implementation-defined and would break
// cross-platform reproducibility of bucket contents.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace detail

// Samples B*S distinct examples with the seeded RNG and partitions them into
// B buckets of exactly S, skipping candidates that would duplicate a
// question or context already in the bucket under construction. Re-runs
// with the same (pool, seed) produce identical buckets.
inline std::vector<Bucket> build_buckets(const std::vector<Example>& pool,
                                         const PipelineConfig& cfg = {}) {
    cfg.validate();
    const std::size_t need =
        static_cast<std::size_t>(cfg.bucket_count) * static_cast<std::size_t>(cfg.bucket_size);
    if (pool.size() < need) {
        throw util::PipelineError("build_buckets: pool has " + std::to_string(pool.size()) +
                                  " examples but " + std::to_string(need) + " are required (" +
                                  std::to_string(cfg.bucket_count) + " buckets of " +
                                  std::to_string(cfg.bucket_size) + "); short by " +
                                  std::to_string(need - pool.size()));
    }
    for (const auto& ex : pool) {
        if (ex.language != pool.front().language) {
            throw util::PipelineError("build_buckets: pool mixes languages '" +
                                      pool.front().language + "' and '" + ex.language + "'");
        }
    }

    // Deterministic base order, then a seeded shuffle of positions.
    std::vector<Example> sorted = pool;
    std::sort(sorted.begin(), sorted.end(),
              [](const Example& a, const Example& b) { return a.id < b.id; });
    std::vector<std::size_t> order = detail::shuffled_indices(sorted.size(), cfg.rng_seed);

    std::vector<bool> used(sorted.size(), false);
    std::vector<Bucket> buckets;
    for (int b = 0; b < cfg.bucket_count; ++b) {
        Bucket bucket;
        bucket.language = sorted.front().language;
        bucket.index = b;
        std::set<std::string> questions;
        std::set<std::string> contexts;
        for (std::size_t pos : order) {
            if (static_cast<int>(bucket.examples.size()) == cfg.bucket_size) break;
            if (used[pos]) continue;
            const Example& ex = sorted[pos];
            std::string qkey = detail::question_dedup_key(ex);
            std::string ckey = detail::context_dedup_key(ex);
            if (questions.count(qkey) || contexts.count(ckey)) continue;  // rule 4
            used[pos] = true;
            questions.insert(qkey);
            contexts.insert(ckey);
            bucket.examples.push_back(ex);
        }
        if (static_cast<int>(bucket.examples.size()) < cfg.bucket_size) {
            throw util::PipelineError(
                "build_buckets: bucket " + std::to_string(b) + " holds only " +
                std::to_string(bucket.examples.size()) + " of " + std::to_string(cfg.bucket_size) +
                " examples after duplicate-context/question exclusions");
        }
        buckets.push_back(std::move(bucket));
    }
    return buckets;
}

// Builds id-aligned buckets for several languages at once. Bucket membership
// is decided once on the source-language pool (so duplicate detection sees
// the original texts) and the resulting id partition is projected onto every
// translated pool, which must cover exactly the same ids. Every language
// therefore gets the same ids in the same bucket, preserving parallelism.
inline std::map<std::string, std::vector<Bucket>> build_parallel_buckets(
    const std::vector<Example>& source_pool,
    const std::map<std::string, std::vector<Example>>& translated_pools,
    const PipelineConfig& cfg = {}) {
    std::set<std::string> source_ids;
    for (const auto& ex : source_pool) source_ids.insert(ex.id);
    for (const auto& [language, pool] : translated_pools) {
        std::set<std::string> ids;
        for (const auto& ex : pool) ids.insert(ex.id);
        if (ids != source_ids) {
            throw util::PipelineError("build_parallel_buckets: id set for '" + language +
                                      "' does not match the source pool");
        }
    }

    std::vector<Bucket> source_buckets = build_buckets(source_pool, cfg);
    std::map<std::string, std::vector<Bucket>> out;
    out[source_pool.front().language] = source_buckets;
    for (const auto& [language, pool] : translated_pools) {
        std::map<std::string, const Example*> by_id;
        for (const auto& ex : pool) by_id[ex.id] = &ex;
        std::vector<Bucket> projected;
        for (const auto& sb : source_buckets) {
            Bucket bucket;
            bucket.language = language;
            bucket.index = sb.index;
            for (const auto& ex : sb.examples) bucket.examples.push_back(*by_id.at(ex.id));
            projected.push_back(std::move(bucket));
        }
        out[language] = std::move(projected);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bucket serialization (one JSON record per line)
// ---------------------------------------------------------------------------

inline std::string buckets_to_jsonl(const std::vector<Bucket>& buckets) {
    std::string out;
    for (const auto& bucket : buckets) {
        for (const auto& ex : bucket.examples) {
            nlohmann::json rec{
                {"language", bucket.language},   {"bucket_index", bucket.index},
                {"id", ex.id},                   {"task", corpus::to_string(ex.task)},
                {"context", ex.context},         {"question", ex.question},
                {"answers", ex.gold_answers},
            };
            if (!ex.extras.empty()) rec["extras"] = ex.extras;
            out += rec.dump();
            out += '\n';
        }
    }
    return out;
}

inline void write_buckets_jsonl(const std::string& path, const std::vector<Bucket>& buckets) {
    util::write_text_file_atomic(path, buckets_to_jsonl(buckets));
}

inline std::vector<Bucket> read_buckets_jsonl(const std::string& path) {
    std::map<int, Bucket> by_index;
    std::vector<std::string> lines = util::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
            throw util::DataError(path + ": line " + std::to_string(i + 1) + ": " + e.what());
        }
        Example ex;
        ex.id = rec.at("id").get<std::string>();
        ex.language = rec.at("language").get<std::string>();
        ex.task = corpus::task_from_string(rec.at("task").get<std::string>());
        ex.context = rec.at("context").get<std::string>();
        ex.question = rec.at("question").get<std::string>();
        ex.gold_answers = rec.at("answers").get<std::vector<std::string>>();
        if (rec.contains("extras")) {
            ex.extras = rec["extras"].get<std::map<std::string, std::string>>();
        }
        int index = rec.at("bucket_index").get<int>();
        Bucket& bucket = by_index[index];
        bucket.language = ex.language;
        bucket.index = index;
        bucket.examples.push_back(std::move(ex));
    }
    if (by_index.empty()) throw util::DataError("no bucket records in " + path);
    std::vector<Bucket> buckets;
    for (auto& [_, bucket] : by_index) buckets.push_back(std::move(bucket));
    return buckets;
}

inline std::string drop_report_to_tsv(const DropReport& drops) {
    std::string out = "id\trule\tdetail\n";
    for (const auto& d : drops) {
        out += d.id + "\t" + d.rule + "\t" + d.detail + "\n";
    }
    return out;
}

}  // namespace clteval::mt
