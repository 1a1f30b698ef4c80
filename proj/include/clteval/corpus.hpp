#pragma once

// Dataset loading and parallel-corpus validation: typed task records, the
// four task-format loaders, and id-intersection alignment across languages.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clteval/util.hpp"

namespace clteval::corpus {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

enum class Task { qa, paws_x, xnli, xcopa };

inline std::string to_string(Task t) {
    switch (t) {
        case Task::qa: return "qa";
        case Task::paws_x: return "paws-x";
        case Task::xnli: return "xnli";
        case Task::xcopa: return "xcopa";
    }
    return "?";
}

inline Task task_from_string(std::string_view s) {
    if (s == "qa") return Task::qa;
    if (s == "paws-x") return Task::paws_x;
    if (s == "xnli") return Task::xnli;
    if (s == "xcopa") return Task::xcopa;
    throw util::ConfigError("unknown task: " + std::string(s));
}

enum class QaFormat { squad_v1, mlqa, xquad };

inline QaFormat qa_format_from_string(std::string_view s) {
    if (s == "squad-v1") return QaFormat::squad_v1;
    if (s == "mlqa") return QaFormat::mlqa;
    if (s == "xquad") return QaFormat::xquad;
    throw util::ConfigError("unknown QA dataset format: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Example
// ---------------------------------------------------------------------------

// One task instance in one language. `context`/`question` semantics are
// per task (QA passage/question, XNLI premise/hypothesis, XCOPA premise).
// `extras` carries task-specific fields:
//   paws-x : sentence1, sentence2, label_key
//   xnli   : label_key
//   xcopa  : choice1, choice2, kind (cause|effect)
// where label_key names the localized verbalization of the gold label
// (yes|no|true|false|neither) so prompts can render it in any language.
struct Example {
    std::string id;
    std::string language;
    Task task = Task::qa;
    std::string context;
    std::string question;
    std::vector<std::string> gold_answers;
    std::map<std::string, std::string> extras;

    std::optional<std::string> extra(const std::string& key) const {
        auto it = extras.find(key);
        if (it == extras.end()) return std::nullopt;
        return it->second;
    }
};

// One dropped item and the rule that removed it.
struct Drop {
    std::string id;
    std::string rule;
    std::string detail;
};

using DropReport = std::vector<Drop>;

// Loader output: examples plus non-fatal warnings (e.g. duplicate ids).
struct LoadResult {
    std::vector<Example> examples;
    std::vector<std::string> warnings;
};

namespace detail {

// Keep-first dedup by id; duplicates are a warning, not an error, because
// the pipeline applies its own dedup rules downstream.
inline void dedup_ids(LoadResult& result) {
    std::set<std::string> seen;
    std::vector<Example> kept;
    kept.reserve(result.examples.size());
    for (auto& ex : result.examples) {
        if (!seen.insert(ex.id).second) {
            result.warnings.push_back("duplicate id kept-first: " + ex.id);
            continue;
        }
        kept.push_back(std::move(ex));
    }
    result.examples = std::move(kept);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// QA loader (SQuAD v1.1 / XQuAD / MLQA nested layout)
// ---------------------------------------------------------------------------

inline LoadResult load_qa_dataset_ex(const std::string& path, QaFormat /*format*/,
                                     const std::string& language) {
    // All three formats share the nested article -> paragraphs -> qas layout;
    // the format parameter documents intent and reserves room for future
    // divergence (e.g. MLQA per-language file naming).
    json root;
    try {
        root = json::parse(util::read_text_file(path));
    } catch (const json::exception& e) {
        throw util::DataError("malformed QA dataset " + path + ": " + e.what());
    }
    if (!root.is_object() || !root.contains("data") || !root["data"].is_array()) {
        throw util::DataError("malformed QA dataset " + path + ": missing top-level 'data' array");
    }
    LoadResult result;
    for (std::size_t ai = 0; ai < root["data"].size(); ++ai) {
        const json& article = root["data"][ai];
        std::string where = "data[" + std::to_string(ai) + "]";
        if (!article.contains("paragraphs") || !article["paragraphs"].is_array()) {
            throw util::DataError(path + ": " + where + " lacks 'paragraphs'");
        }
        for (std::size_t pi = 0; pi < article["paragraphs"].size(); ++pi) {
            const json& para = article["paragraphs"][pi];
            std::string pwhere = where + ".paragraphs[" + std::to_string(pi) + "]";
            if (!para.contains("context") || !para["context"].is_string()) {
                throw util::DataError(path + ": " + pwhere + " lacks 'context'");
            }
            if (!para.contains("qas") || !para["qas"].is_array()) {
                throw util::DataError(path + ": " + pwhere + " lacks 'qas'");
            }
            for (std::size_t qi = 0; qi < para["qas"].size(); ++qi) {
                const json& qa = para["qas"][qi];
                std::string qwhere = pwhere + ".qas[" + std::to_string(qi) + "]";
                if (!qa.contains("id") || !qa.contains("question")) {
                    throw util::DataError(path + ": " + qwhere + " lacks 'id' or 'question'");
                }
                if (!qa.contains("answers") || !qa["answers"].is_array() || qa["answers"].empty()) {
                    throw util::DataError(path + ": " + qwhere + " lacks a non-empty 'answers' array");
                }
                Example ex;
                ex.id = qa["id"].is_string() ? qa["id"].get<std::string>()
                                             : qa["id"].dump();
                ex.language = language;
                ex.task = Task::qa;
                ex.context = para["context"].get<std::string>();
                ex.question = qa["question"].get<std::string>();
                for (const json& ans : qa["answers"]) {
                    if (!ans.contains("text") || !ans["text"].is_string()) {
                        throw util::DataError(path + ": " + qwhere + " has an answer without 'text'");
                    }
                    ex.gold_answers.push_back(ans["text"].get<std::string>());
                }
                result.examples.push_back(std::move(ex));
            }
        }
    }
    if (result.examples.empty()) {
        throw util::DataError("empty QA dataset: " + path);
    }
    detail::dedup_ids(result);
    return result;
}

inline std::vector<Example> load_qa_dataset(const std::string& path, QaFormat format,
                                            const std::string& language) {
    return load_qa_dataset_ex(path, format, language).examples;
}

// ---------------------------------------------------------------------------
// Classification loaders
// ---------------------------------------------------------------------------

namespace detail {

// One data row plus its 1-based line number, so error messages can point at
// the file line rather than the data-row index.
struct TsvRow {
    std::size_t line_no = 0;
    std::vector<std::string> cols;
};

inline std::vector<TsvRow> read_tsv_rows(const std::string& path, std::size_t expect_cols,
                                         const std::string& header) {
    std::vector<std::string> lines = util::read_lines(path);
    std::vector<TsvRow> rows;
    bool first = true;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty() || line[0] == '#') continue;
        if (first && line == header) {
            first = false;
            continue;
        }
        first = false;
        auto cols = util::split(line, '\t');
        if (cols.size() != expect_cols) {
            throw util::DataError(path + ": row " + std::to_string(i + 1) + " has " +
                                  std::to_string(cols.size()) + " columns, expected " +
                                  std::to_string(expect_cols));
        }
        rows.push_back({i + 1, std::move(cols)});
    }
    return rows;
}

}  // namespace detail

// PAWS-X rows: id<TAB>sentence1<TAB>sentence2<TAB>label with label in {0,1}.
// XNLI rows: id<TAB>premise<TAB>hypothesis<TAB>label with label in
// {entailment, neutral, contradiction}. XCOPA: one JSON record per line with
// fields id/premise/choice1/choice2/question/label.
//
// gold_answers holds the canonical (English) verbalization of the label;
// extras["label_key"] carries the localization key so rendering and scoring
// can re-verbalize per language. XCOPA's gold is the chosen option text,
// which is already in-language.
inline LoadResult load_classification_dataset_ex(const std::string& path, Task task,
                                                 const std::string& language) {
    LoadResult result;
    if (task == Task::paws_x) {
        for (const auto& [line_no, r] : detail::read_tsv_rows(path, 4,
                                                              "id\tsentence1\tsentence2\tlabel")) {
            Example ex;
            ex.id = r[0];
            ex.language = language;
            ex.task = Task::paws_x;
            ex.context = r[1] + "\n" + r[2];
            ex.extras["sentence1"] = r[1];
            ex.extras["sentence2"] = r[2];
            if (r[3] == "1") {
                ex.gold_answers = {"Yes"};
                ex.extras["label_key"] = "yes";
            } else if (r[3] == "0") {
                ex.gold_answers = {"No"};
                ex.extras["label_key"] = "no";
            } else {
                throw util::DataError(path + ": row " + std::to_string(line_no) +
                                      " has unknown paws-x label '" + r[3] + "'");
            }
            result.examples.push_back(std::move(ex));
        }
    } else if (task == Task::xnli) {
        for (const auto& [line_no, r] : detail::read_tsv_rows(path, 4,
                                                              "id\tpremise\thypothesis\tlabel")) {
            Example ex;
            ex.id = r[0];
            ex.language = language;
            ex.task = Task::xnli;
            ex.context = r[1];
            ex.question = r[2];
            if (r[3] == "entailment") {
                ex.gold_answers = {"True"};
                ex.extras["label_key"] = "true";
            } else if (r[3] == "contradiction") {
                ex.gold_answers = {"False"};
                ex.extras["label_key"] = "false";
            } else if (r[3] == "neutral") {
                ex.gold_answers = {"Neither"};
                ex.extras["label_key"] = "neither";
            } else {
                throw util::DataError(path + ": row " + std::to_string(line_no) +
                                      " has unknown xnli label '" + r[3] + "'");
            }
            result.examples.push_back(std::move(ex));
        }
    } else if (task == Task::xcopa) {
        std::vector<std::string> lines = util::read_lines(path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (lines[i].empty() || lines[i][0] == '#') continue;
            json rec;
            try {
                rec = json::parse(lines[i]);
            } catch (const json::exception& e) {
                throw util::DataError(path + ": row " + std::to_string(i + 1) + ": " + e.what());
            }
            for (const char* field : {"id", "premise", "choice1", "choice2", "question", "label"}) {
                if (!rec.contains(field)) {
                    throw util::DataError(path + ": row " + std::to_string(i + 1) +
                                          " lacks field '" + field + "'");
                }
            }
            Example ex;
            ex.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
            ex.language = language;
            ex.task = Task::xcopa;
            ex.context = rec["premise"].get<std::string>();
            ex.extras["choice1"] = rec["choice1"].get<std::string>();
            ex.extras["choice2"] = rec["choice2"].get<std::string>();
            std::string kind = rec["question"].get<std::string>();
            if (kind != "cause" && kind != "effect") {
                throw util::DataError(path + ": row " + std::to_string(i + 1) +
                                      " has unknown xcopa question kind '" + kind + "'");
            }
            ex.extras["kind"] = kind;
            long label = rec["label"].is_number_integer()
                             ? rec["label"].get<long>()
                             : (rec["label"].is_string() ? std::stol(rec["label"].get<std::string>())
                                                         : -1);
            if (label == 0) {
                ex.gold_answers = {ex.extras["choice1"]};
            } else if (label == 1) {
                ex.gold_answers = {ex.extras["choice2"]};
            } else {
                throw util::DataError(path + ": row " + std::to_string(i + 1) +
                                      " has unknown xcopa label '" + rec["label"].dump() + "'");
            }
            result.examples.push_back(std::move(ex));
        }
    } else {
        throw util::ConfigError("load_classification_dataset: task must be paws-x, xnli, or xcopa");
    }
    if (result.examples.empty()) {
        throw util::DataError("empty classification dataset: " + path);
    }
    detail::dedup_ids(result);
    return result;
}

inline std::vector<Example> load_classification_dataset(const std::string& path, Task task,
                                                        const std::string& language) {
    return load_classification_dataset_ex(path, task, language).examples;
}

// ---------------------------------------------------------------------------
// ParallelCorpus
// ---------------------------------------------------------------------------

// Id-aligned view over the per-language datasets. Per-language sequences are
// sorted by id, so example order is identical across languages.
struct ParallelCorpus {
    Task task = Task::qa;
    std::vector<std::string> ids;  // sorted, present in every language
    std::map<std::string, std::vector<Example>> by_language;

    const Example* find(const std::string& language, const std::string& id) const {
        auto lit = by_language.find(language);
        if (lit == by_language.end()) return nullptr;
        const auto& vec = lit->second;
        auto it = std::lower_bound(vec.begin(), vec.end(), id,
                                   [](const Example& e, const std::string& v) { return e.id < v; });
        if (it == vec.end() || it->id != id) return nullptr;
        return &*it;
    }

    bool has_id(const std::string& id) const {
        return std::binary_search(ids.begin(), ids.end(), id);
    }

    std::vector<std::string> languages() const {
        std::vector<std::string> out;
        out.reserve(by_language.size());
        for (const auto& [lang, _] : by_language) out.push_back(lang);
        return out;
    }
};

struct ParallelismResult {
    ParallelCorpus corpus;
    DropReport drops;
};

// Intersects id sets across languages; ids missing from any language are
// dropped from all of them and reported. Zero surviving ids is a hard error.
inline ParallelismResult validate_parallelism(
    const std::map<std::string, std::vector<Example>>& per_language) {
    if (per_language.size() < 2) {
        throw util::ConfigError("validate_parallelism requires at least two languages, got " +
                                std::to_string(per_language.size()));
    }
    Task task = per_language.begin()->second.empty() ? Task::qa
                                                     : per_language.begin()->second.front().task;

    std::set<std::string> shared;
    bool first = true;
    for (const auto& [lang, examples] : per_language) {
        std::set<std::string> ids;
        for (const auto& ex : examples) ids.insert(ex.id);
        if (first) {
            shared = std::move(ids);
            first = false;
        } else {
            std::set<std::string> kept;
            std::set_intersection(shared.begin(), shared.end(), ids.begin(), ids.end(),
                                  std::inserter(kept, kept.begin()));
            shared = std::move(kept);
        }
    }

    ParallelismResult result;
    result.corpus.task = task;
    result.corpus.ids.assign(shared.begin(), shared.end());

    for (const auto& [lang, examples] : per_language) {
        std::vector<Example> kept;
        kept.reserve(shared.size());
        for (const auto& ex : examples) {
            if (shared.count(ex.id)) {
                kept.push_back(ex);
            } else {
                result.drops.push_back(
                    {ex.id, "parallel-id", "id absent from at least one language (" + lang + ")"});
            }
        }
        std::sort(kept.begin(), kept.end(),
                  [](const Example& a, const Example& b) { return a.id < b.id; });
        result.corpus.by_language[lang] = std::move(kept);
    }

    if (result.corpus.ids.empty()) {
        throw util::DataError("validate_parallelism: no ids shared across all languages");
    }
    return result;
}

}  // namespace clteval::corpus
