#pragma once

// Transfer-gap and correlation analyses: language profiles from pre-training
// corpus tables, seen/unseen grouping, gap arithmetic, Pearson correlation,
// and loaders for published result tables used as arithmetic fixtures.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clteval/util.hpp"

namespace clteval::analysis {

// ---------------------------------------------------------------------------
// Language profiles
// ---------------------------------------------------------------------------

// Per-language metadata accumulated from one or more model-family corpus
// tables plus an optional genetic-proximity file.
struct LanguageProfile {
    std::string iso;
    std::map<std::string, bool> seen;            // model family -> observed in pre-training
    std::map<std::string, double> corpus_gib;    // model family -> size in GiB
    std::map<std::string, double> proportion;    // model family -> fraction of total corpus
    std::optional<double> proximity_to_en;  // 0-100 genetic-proximity scale (0 = closest)

    bool seen_by(const std::string& family) const {
        auto it = seen.find(family);
        return it != seen.end() && it->second;
    }
};

using ProfileRegistry = std::map<std::string, LanguageProfile>;  // iso -> profile

// Loads a pre-training corpus table: TSV with header name<TAB>iso<TAB>gib.
// Rows whose iso is "-" (unassigned/aggregate entries) contribute to the
// family total — and therefore to every proportion denominator — but create
// no profile. A language is "seen" iff it appears with nonzero GiB.
inline void load_corpus_table(const std::string& path, const std::string& family,
                              ProfileRegistry& registry) {
    std::vector<std::string> lines = util::read_lines(path);
    double total_gib = 0.0;
    std::vector<std::pair<std::string, double>> entries;
    bool saw_header = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "name\tiso\tgib") {
                throw util::DataError(path + ": expected header 'name\\tiso\\tgib', got '" + line +
                                      "'");
            }
            saw_header = true;
            continue;
        }
        auto cols = util::split(line, '\t');
        if (cols.size() != 3) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) + " is not 3 columns");
        }
        double gib = 0.0;
        try {
            gib = std::stod(cols[2]);
        } catch (const std::exception&) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) + " has non-numeric GiB '" +
                                  cols[2] + "'");
        }
        total_gib += gib;
        if (cols[1] != "-") entries.emplace_back(cols[1], gib);
    }
    if (!saw_header || entries.empty()) {
        throw util::DataError(path + ": no corpus rows loaded");
    }
    if (total_gib <= 0.0) {
        throw util::DataError(path + ": total corpus size is not positive");
    }
    for (const auto& [iso, gib] : entries) {
        LanguageProfile& profile = registry[iso];
        profile.iso = iso;
        profile.seen[family] = gib > 0.0;
        profile.corpus_gib[family] = gib;
        profile.proportion[family] = gib / total_gib;
    }
}

// Loads genetic-proximity values: TSV with header language<TAB>proximity.
// Rows with a blank value are skipped (the shipped file is a template whose
// values the user must fill in from the external source).
inline void load_proximity_table(const std::string& path, ProfileRegistry& registry) {
    std::vector<std::string> lines = util::read_lines(path);
    bool saw_header = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "language\tproximity") {
                throw util::DataError(path + ": expected header 'language\\tproximity', got '" +
                                      line + "'");
            }
            saw_header = true;
            continue;
        }
        auto cols = util::split(line, '\t');
        if (cols.size() < 2 || util::trim(cols[1]).empty()) continue;  // template blank
        double value = 0.0;
        try {
            value = std::stod(cols[1]);
        } catch (const std::exception&) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) +
                                  " has non-numeric proximity '" + cols[1] + "'");
        }
        if (value < 0.0 || value > 100.0) {
            throw util::DataError(path + ": proximity for " + cols[0] + " outside [0,100]");
        }
        LanguageProfile& profile = registry[cols[0]];
        profile.iso = cols[0];
        profile.proximity_to_en = value;
    }
    if (!saw_header) throw util::DataError(path + ": missing proximity header");
}

// ---------------------------------------------------------------------------
// Seen/unseen grouping
// ---------------------------------------------------------------------------

struct LanguageGroups {
    std::set<std::string> seen;
    std::set<std::string> unseen;
};

// Partitions `targets` by whether the family's pre-training corpus contains
// them (presence with nonzero GiB). A target with no profile at all is a
// configuration error — it would silently skew group means otherwise.
inline LanguageGroups group_languages(const ProfileRegistry& registry, const std::string& family,
                                      const std::set<std::string>& targets) {
    LanguageGroups groups;
    for (const auto& iso : targets) {
        auto it = registry.find(iso);
        if (it == registry.end()) {
            throw util::ConfigError("no language profile for target '" + iso + "'");
        }
        if (it->second.seen_by(family)) {
            groups.seen.insert(iso);
        } else {
            groups.unseen.insert(iso);
        }
    }
    return groups;
}

// ---------------------------------------------------------------------------
// Transfer gap
// ---------------------------------------------------------------------------

// gap = English MONO score minus the group's mean score (0-100 scale).
struct TransferGapRecord {
    std::string model;
    std::string method;
    std::string group_label;  // "seen" | "unseen" | a language code
    double en_mono_f1 = 0.0;
    double group_mean = 0.0;
    double gap = 0.0;  // en_mono_f1 - group_mean, unrounded

    double group_mean_2dp() const { return std::round(group_mean * 100.0) / 100.0; }
    double gap_2dp() const { return std::round(gap * 100.0) / 100.0; }
};

inline TransferGapRecord transfer_gap(double en_mono_f1, const std::vector<double>& group_scores,
                                      std::string model = {}, std::string method = {},
                                      std::string group_label = {}) {
    if (group_scores.empty()) {
        throw util::ConfigError("transfer_gap: group must be non-empty");
    }
    TransferGapRecord rec;
    rec.model = std::move(model);
    rec.method = std::move(method);
    rec.group_label = std::move(group_label);
    rec.en_mono_f1 = en_mono_f1;
    rec.group_mean = std::accumulate(group_scores.begin(), group_scores.end(), 0.0) /
                     static_cast<double>(group_scores.size());
    rec.gap = en_mono_f1 - rec.group_mean;
    return rec;
}

// ---------------------------------------------------------------------------
// Pearson correlation
// ---------------------------------------------------------------------------

// Standard sample Pearson coefficient, two-pass. Requires n >= 3 and
// nonzero variance on both sides.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw util::ConfigError("pearson: series lengths differ (" + std::to_string(xs.size()) +
                                " vs " + std::to_string(ys.size()) + ")");
    }
    if (xs.size() < 3) {
        throw util::ConfigError("pearson: need at least 3 points, got " +
                                std::to_string(xs.size()));
    }
    const auto n = static_cast<double>(xs.size());
    double mean_x = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double mean_y = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mean_x;
        double dy = ys[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw util::DataError("pearson: undefined correlation (zero variance)");
    }
    // A single sqrt over the product keeps perfectly collinear integer data at
    // exactly +/-1 (IEEE sqrt of an exactly representable square is exact).
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Correlation report
// ---------------------------------------------------------------------------

enum class CorrelationX { proximity, proportion };

inline std::string to_string(CorrelationX x) {
    return x == CorrelationX::proximity ? "proximity" : "proportion";
}

struct CorrelationPair {
    std::string language;
    double x = 0.0;
    double y = 0.0;  // transfer gap
};

struct CorrelationReport {
    std::string x_label;
    std::string y_label = "transfer-gap";
    std::vector<CorrelationPair> pairs;  // sorted by language
    double r = 0.0;
    std::vector<std::string> excluded;
};

// Assembles (x, gap) pairs over the non-excluded languages and computes r.
// Every surviving language must have both a gap and an x value; fewer than
// three surviving pairs is an error.
inline CorrelationReport correlation_report(const std::map<std::string, double>& gap_by_language,
                                            const ProfileRegistry& registry, CorrelationX x_kind,
                                            const std::string& family,
                                            const std::set<std::string>& exclusions = {}) {
    CorrelationReport report;
    report.x_label = to_string(x_kind);
    for (const auto& [language, gap] : gap_by_language) {
        if (exclusions.count(language)) {
            report.excluded.push_back(language);
            continue;
        }
        auto it = registry.find(language);
        if (it == registry.end()) {
            throw util::ConfigError("correlation_report: no profile for language '" + language +
                                    "'");
        }
        double x = 0.0;
        if (x_kind == CorrelationX::proximity) {
            if (!it->second.proximity_to_en.has_value()) {
                throw util::ConfigError("correlation_report: language '" + language +
                                        "' has no proximity value (fill in the proximity table)");
            }
            x = *it->second.proximity_to_en;
        } else {
            auto pit = it->second.proportion.find(family);
            if (pit == it->second.proportion.end()) {
                throw util::ConfigError("correlation_report: language '" + language +
                                        "' has no proportion for family '" + family + "'");
            }
            x = pit->second;
        }
        report.pairs.push_back({language, x, gap});
    }
    if (report.pairs.size() < 3) {
        throw util::ConfigError("correlation_report: only " + std::to_string(report.pairs.size()) +
                                " pairs survive exclusions; need at least 3");
    }
    std::vector<double> xs, ys;
    xs.reserve(report.pairs.size());
    ys.reserve(report.pairs.size());
    for (const auto& p : report.pairs) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    report.r = pearson(xs, ys);
    return report;
}

// ---------------------------------------------------------------------------
// Result-table fixtures
// ---------------------------------------------------------------------------

// Row of a published k-shot result table:
// model<TAB>method<TAB>k<TAB>language<TAB>mean<TAB>std.
struct FewshotRow {
    std::string model;
    std::string method;
    int k = 0;
    std::string language;
    double mean = 0.0;
    double stddev = 0.0;
};

inline std::vector<FewshotRow> load_fewshot_table(const std::string& path) {
    std::vector<std::string> lines = util::read_lines(path);
    std::vector<FewshotRow> rows;
    bool saw_header = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "model\tmethod\tk\tlanguage\tmean\tstd") {
                throw util::DataError(path + ": unexpected few-shot header '" + line + "'");
            }
            saw_header = true;
            continue;
        }
        auto cols = util::split(line, '\t');
        if (cols.size() != 6) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) + " is not 6 columns");
        }
        FewshotRow row;
        row.model = cols[0];
        row.method = cols[1];
        try {
            row.k = std::stoi(cols[2]);
            row.mean = std::stod(cols[4]);
            row.stddev = std::stod(cols[5]);
        } catch (const std::exception&) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) + " has non-numeric cells");
        }
        row.language = cols[3];
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw util::DataError(path + ": no few-shot rows loaded");
    return rows;
}

// Row of a zero-shot table: model<TAB>language<TAB>f1.
struct ZeroshotRow {
    std::string model;
    std::string language;
    double f1 = 0.0;
};

inline std::vector<ZeroshotRow> load_zeroshot_table(const std::string& path) {
    std::vector<std::string> lines = util::read_lines(path);
    std::vector<ZeroshotRow> rows;
    bool saw_header = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "model\tlanguage\tf1") {
                throw util::DataError(path + ": unexpected zero-shot header '" + line + "'");
            }
            saw_header = true;
            continue;
        }
        auto cols = util::split(line, '\t');
        if (cols.size() != 3) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) + " is not 3 columns");
        }
        ZeroshotRow row;
        row.model = cols[0];
        row.language = cols[1];
        try {
            row.f1 = std::stod(cols[2]);
        } catch (const std::exception&) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) + " has non-numeric f1");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw util::DataError(path + ": no zero-shot rows loaded");
    return rows;
}

// Convenience lookup over the few-shot fixture.
struct FewshotTable {
    std::vector<FewshotRow> rows;

    std::optional<double> mean_of(const std::string& model, const std::string& method, int k,
                                  const std::string& language) const {
        for (const auto& row : rows) {
            if (row.model == model && row.method == method && row.k == k &&
                row.language == language) {
                return row.mean;
            }
        }
        return std::nullopt;
    }

    std::vector<double> means_of(const std::string& model, const std::string& method, int k,
                                 const std::set<std::string>& languages) const {
        std::vector<double> out;
        for (const auto& language : languages) {
            auto value = mean_of(model, method, k, language);
            if (!value.has_value()) {
                throw util::DataError("few-shot table lacks a row for " + model + "/" + method +
                                      "/k=" + std::to_string(k) + "/" + language);
            }
            out.push_back(*value);
        }
        return out;
    }
};

}  // namespace clteval::analysis
