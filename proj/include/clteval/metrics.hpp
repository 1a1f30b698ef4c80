#pragma once

// Answer scoring: multilingual-aware normalization, token-overlap F1, exact
// match (both max-over-golds), and bucket-level aggregation to mean ± std.

#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clteval/text.hpp"
#include "clteval/util.hpp"

namespace clteval::metrics {

// ---------------------------------------------------------------------------
// Normalization and per-item metrics
// ---------------------------------------------------------------------------

// NFC, lowercase, punctuation stripped, script-aware tokens; English
// additionally drops the articles {a, an, the}. See text.hpp for the exact
// character classes.
inline std::vector<std::string> normalize_answer(std::string_view answer,
                                                 std::string_view language) {
    return text::normalize_answer_tokens(answer, language);
}

namespace detail {

inline std::map<std::string, long> token_counts(const std::vector<std::string>& tokens) {
    std::map<std::string, long> counts;
    for (const auto& t : tokens) ++counts[t];
    return counts;
}

inline double f1_single(const std::vector<std::string>& pred_tokens,
                        const std::vector<std::string>& gold_tokens) {
    if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;  // both normalize to nothing
    if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;
    auto pred_counts = token_counts(pred_tokens);
    auto gold_counts = token_counts(gold_tokens);
    long overlap = 0;
    for (const auto& [token, count] : pred_counts) {
        auto it = gold_counts.find(token);
        if (it != gold_counts.end()) overlap += std::min(count, it->second);
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

// Token-multiset F1, maximum over gold answers.
inline double f1(std::string_view prediction, const std::vector<std::string>& golds,
                 std::string_view language) {
    if (golds.empty()) throw util::ConfigError("f1: golds must be non-empty");
    std::vector<std::string> pred_tokens = normalize_answer(prediction, language);
    double best = 0.0;
    for (const auto& gold : golds) {
        best = std::max(best, detail::f1_single(pred_tokens, normalize_answer(gold, language)));
    }
    return best;
}

// 1 iff the normalized prediction equals any normalized gold.
inline double exact_match(std::string_view prediction, const std::vector<std::string>& golds,
                          std::string_view language) {
    if (golds.empty()) throw util::ConfigError("exact_match: golds must be non-empty");
    std::vector<std::string> pred_tokens = normalize_answer(prediction, language);
    for (const auto& gold : golds) {
        if (pred_tokens == normalize_answer(gold, language)) return 1.0;
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct ScoreRecord {
    std::string id;
    double f1 = 0.0;
    double exact_match = 0.0;
    std::string language;
    std::string method;
    int k = 0;
    int bucket = 0;
    std::string model;
};

inline nlohmann::json score_to_json(const ScoreRecord& rec) {
    return nlohmann::json{{"id", rec.id},           {"f1", rec.f1},
                          {"exact_match", rec.exact_match}, {"language", rec.language},
                          {"method", rec.method},   {"k", rec.k},
                          {"bucket", rec.bucket},   {"model", rec.model}};
}

inline ScoreRecord score_from_json(const nlohmann::json& j) {
    ScoreRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.f1 = j.at("f1").get<double>();
    rec.exact_match = j.at("exact_match").get<double>();
    rec.language = j.at("language").get<std::string>();
    rec.method = j.at("method").get<std::string>();
    rec.k = j.at("k").get<int>();
    rec.bucket = j.at("bucket").get<int>();
    rec.model = j.at("model").get<std::string>();
    return rec;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

// mean / std across bucket means for one (model, task, language, method, k)
// grid cell, on the 0-100 scale.
struct AggregateResult {
    std::string model;
    std::string task;
    std::string language;
    std::string method;
    int k = 0;
    double mean = 0.0;    // mean of bucket means, x100 scale
    double stddev = 0.0;  // sample standard deviation across bucket means
    double stderror = 0.0;
    int n_buckets = 0;
    bool single_bucket = false;  // std is degenerate (one bucket)
};

namespace detail {

inline double mean_of(const std::vector<double>& values) {
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

}  // namespace detail

// Core arithmetic: per-bucket example scores (0-1 scale) -> bucket means
// (x100) -> group mean and sample std across buckets.
inline AggregateResult aggregate_bucket_scores(const std::vector<std::vector<double>>& per_bucket) {
    if (per_bucket.empty()) throw util::ConfigError("aggregate: no buckets");
    std::vector<double> bucket_means;
    bucket_means.reserve(per_bucket.size());
    for (std::size_t b = 0; b < per_bucket.size(); ++b) {
        if (per_bucket[b].empty()) {
            throw util::ConfigError("aggregate: bucket " + std::to_string(b) + " is empty");
        }
        bucket_means.push_back(detail::mean_of(per_bucket[b]) * 100.0);
    }
    AggregateResult result;
    result.n_buckets = static_cast<int>(bucket_means.size());
    result.mean = detail::mean_of(bucket_means);
    if (bucket_means.size() == 1) {
        result.stddev = 0.0;
        result.stderror = 0.0;
        result.single_bucket = true;
    } else {
        double ss = 0.0;
        for (double m : bucket_means) ss += (m - result.mean) * (m - result.mean);
        result.stddev = std::sqrt(ss / static_cast<double>(bucket_means.size() - 1));
        result.stderror = result.stddev / std::sqrt(static_cast<double>(bucket_means.size()));
    }
    return result;
}

// Convenience: aggregate ScoreRecords already grouped by bucket, selecting
// the f1 or exact_match field.
enum class ScoreField { f1, exact_match };

inline AggregateResult aggregate(const std::vector<std::vector<ScoreRecord>>& buckets,
                                 ScoreField field = ScoreField::f1) {
    std::vector<std::vector<double>> values(buckets.size());
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        values[b].reserve(buckets[b].size());
        for (const auto& rec : buckets[b]) {
            values[b].push_back(field == ScoreField::f1 ? rec.f1 : rec.exact_match);
        }
    }
    AggregateResult result = aggregate_bucket_scores(values);
    if (!buckets.empty() && !buckets.front().empty()) {
        const ScoreRecord& first = buckets.front().front();
        result.model = first.model;
        result.language = first.language;
        result.method = first.method;
        result.k = first.k;
    }
    return result;
}

}  // namespace clteval::metrics
