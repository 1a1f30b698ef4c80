#pragma once

// Deterministic, byte-stable report rendering: method-by-language score
// tables, transfer-gap tables, correlation scatter data, and a small SVG
// scatter plot with a least-squares line.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clteval/analysis.hpp"
#include "clteval/metrics.hpp"
#include "clteval/util.hpp"

namespace clteval::report {

// ---------------------------------------------------------------------------
// Aggregate tables
// ---------------------------------------------------------------------------

// TSV with rows = model x method (x k), columns = languages, cells
// "mean ± std" at two decimals. Row and column order is lexicographic so
// identical inputs render identical bytes.
inline std::string render_score_table(const std::vector<metrics::AggregateResult>& aggregates) {
    std::set<std::string> languages;
    std::map<std::string, std::map<std::string, const metrics::AggregateResult*>> by_row;
    for (const auto& agg : aggregates) {
        languages.insert(agg.language);
        std::string row_key = agg.model + "\t" + agg.method + "\tk=" + std::to_string(agg.k);
        by_row[row_key][agg.language] = &agg;
    }
    std::string out = "model\tmethod\tk";
    for (const auto& language : languages) out += "\t" + language;
    out += "\n";
    for (const auto& [row_key, cells] : by_row) {
        out += row_key;
        for (const auto& language : languages) {
            auto it = cells.find(language);
            if (it == cells.end()) {
                out += "\t-";
            } else {
                out += "\t" + util::fmt_fixed(it->second->mean, 2) + " ± " +
                       util::fmt_fixed(it->second->stddev, 2);
            }
        }
        out += "\n";
    }
    return out;
}

// Flat aggregate rows, one grid cell per line.
inline std::string render_aggregate_rows(const std::vector<metrics::AggregateResult>& aggregates) {
    std::vector<const metrics::AggregateResult*> sorted;
    sorted.reserve(aggregates.size());
    for (const auto& agg : aggregates) sorted.push_back(&agg);
    std::sort(sorted.begin(), sorted.end(),
              [](const metrics::AggregateResult* a, const metrics::AggregateResult* b) {
                  return std::tie(a->model, a->task, a->language, a->method, a->k) <
                         std::tie(b->model, b->task, b->language, b->method, b->k);
              });
    std::string out = "model\ttask\tlanguage\tmethod\tk\tmean\tstd\tstderr\tn_buckets\n";
    for (const auto* agg : sorted) {
        out += agg->model + "\t" + agg->task + "\t" + agg->language + "\t" + agg->method + "\t" +
               std::to_string(agg->k) + "\t" + util::fmt_fixed(agg->mean, 4) + "\t" +
               util::fmt_fixed(agg->stddev, 4) + "\t" + util::fmt_fixed(agg->stderror, 4) + "\t" +
               std::to_string(agg->n_buckets) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transfer-gap table
// ---------------------------------------------------------------------------

// Rows "model method group: mean (gap)" at two decimals.
inline std::string render_gap_table(const std::vector<analysis::TransferGapRecord>& records) {
    std::vector<const analysis::TransferGapRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& rec : records) sorted.push_back(&rec);
    std::sort(sorted.begin(), sorted.end(),
              [](const analysis::TransferGapRecord* a, const analysis::TransferGapRecord* b) {
                  return std::tie(a->model, a->method, a->group_label) <
                         std::tie(b->model, b->method, b->group_label);
              });
    std::string out = "model\tmethod\tgroup\ten_mono\tgroup_mean\tgap\tdisplay\n";
    for (const auto* rec : sorted) {
        out += rec->model + "\t" + rec->method + "\t" + rec->group_label + "\t" +
               util::fmt_fixed(rec->en_mono_f1, 2) + "\t" + util::fmt_fixed(rec->group_mean, 4) +
               "\t" + util::fmt_fixed(rec->gap, 4) + "\t" +
               util::fmt_fixed(rec->group_mean_2dp(), 2) + " (" +
               util::fmt_fixed(rec->gap_2dp(), 2) + ")\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Correlation scatter
// ---------------------------------------------------------------------------

inline std::string render_scatter_tsv(const analysis::CorrelationReport& report) {
    std::string out = "language\t" + report.x_label + "\t" + report.y_label + "\n";
    std::vector<analysis::CorrelationPair> pairs = report.pairs;
    std::sort(pairs.begin(), pairs.end(),
              [](const analysis::CorrelationPair& a, const analysis::CorrelationPair& b) {
                  return a.language < b.language;
              });
    for (const auto& p : pairs) {
        out += p.language + "\t" + util::fmt_fixed(p.x, 6) + "\t" + util::fmt_fixed(p.y, 4) + "\n";
    }
    out += "# r\t" + util::fmt_fixed(report.r, 4) + "\n";
    if (!report.excluded.empty()) {
        out += "# excluded\t" + util::join(report.excluded, ",") + "\n";
    }
    return out;
}

// Minimal self-contained SVG scatter with a least-squares line. Display
// only; nothing downstream parses it.
inline std::string render_scatter_svg(const analysis::CorrelationReport& report) {
    const int width = 640, height = 480, margin = 60;
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    if (!report.pairs.empty()) {
        min_x = max_x = report.pairs.front().x;
        min_y = max_y = report.pairs.front().y;
        for (const auto& p : report.pairs) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    }
    if (max_x == min_x) max_x = min_x + 1.0;
    if (max_y == min_y) max_y = min_y + 1.0;
    auto sx = [&](double x) {
        return margin + (x - min_x) / (max_x - min_x) * (width - 2 * margin);
    };
    auto sy = [&](double y) {
        return height - margin - (y - min_y) / (max_y - min_y) * (height - 2 * margin);
    };

    // Least-squares fit y = a + b x.
    double n = static_cast<double>(report.pairs.size());
    double sum_x = 0.0, sum_y = 0.0, sum_xx = 0.0, sum_xy = 0.0;
    for (const auto& p : report.pairs) {
        sum_x += p.x;
        sum_y += p.y;
        sum_xx += p.x * p.x;
        sum_xy += p.x * p.y;
    }
    double denom = n * sum_xx - sum_x * sum_x;
    double b = denom != 0.0 ? (n * sum_xy - sum_x * sum_y) / denom : 0.0;
    double a = n > 0 ? (sum_y - b * sum_x) / n : 0.0;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "  <line x1=\"" + util::fmt_fixed(margin, 1) + "\" y1=\"" +
           util::fmt_fixed(height - margin, 1) + "\" x2=\"" + util::fmt_fixed(width - margin, 1) +
           "\" y2=\"" + util::fmt_fixed(height - margin, 1) + "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + util::fmt_fixed(margin, 1) + "\" y1=\"" + util::fmt_fixed(margin, 1) +
           "\" x2=\"" + util::fmt_fixed(margin, 1) + "\" y2=\"" +
           util::fmt_fixed(height - margin, 1) + "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + util::fmt_fixed(sx(min_x), 1) + "\" y1=\"" +
           util::fmt_fixed(sy(a + b * min_x), 1) + "\" x2=\"" + util::fmt_fixed(sx(max_x), 1) +
           "\" y2=\"" + util::fmt_fixed(sy(a + b * max_x), 1) +
           "\" stroke=\"#888888\" stroke-dasharray=\"4,3\"/>\n";
    for (const auto& p : report.pairs) {
        svg += "  <circle cx=\"" + util::fmt_fixed(sx(p.x), 1) + "\" cy=\"" +
               util::fmt_fixed(sy(p.y), 1) + "\" r=\"4\" fill=\"#1f77b4\"/>\n";
        svg += "  <text x=\"" + util::fmt_fixed(sx(p.x) + 6, 1) + "\" y=\"" +
               util::fmt_fixed(sy(p.y) - 6, 1) + "\" font-size=\"11\">" + p.language + "</text>\n";
    }
    svg += "  <text x=\"" + util::fmt_fixed(width / 2.0, 1) + "\" y=\"" +
           util::fmt_fixed(height - margin / 3.0, 1) + "\" text-anchor=\"middle\" font-size=\"13\">" +
           report.x_label + "</text>\n";
    svg += "  <text x=\"" + util::fmt_fixed(margin / 3.0, 1) + "\" y=\"" +
           util::fmt_fixed(height / 2.0, 1) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 " +
           util::fmt_fixed(margin / 3.0, 1) + " " + util::fmt_fixed(height / 2.0, 1) + ")\">" +
           report.y_label + "</text>\n";
    svg += "  <text x=\"" + util::fmt_fixed(width - margin, 1) + "\" y=\"" +
           util::fmt_fixed(margin / 2.0, 1) + "\" text-anchor=\"end\" font-size=\"13\">r = " +
           util::fmt_fixed(report.r, 2) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace clteval::report
