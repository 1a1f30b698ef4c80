#pragma once

// Prompt construction: attribute-level language assignment per prompting
// method, localized template labels, and demonstration/query rendering.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clteval/corpus.hpp"
#include "clteval/util.hpp"

namespace clteval::prompt {

using corpus::Example;
using corpus::Task;

// ---------------------------------------------------------------------------
// Methods and attribute assignments
// ---------------------------------------------------------------------------

enum class Lang { src, tgt };

// Which language each demonstration attribute is rendered in. Queries are
// always fully target-language regardless of the method.
struct AttributeAssignment {
    Lang context_lang = Lang::tgt;
    Lang question_lang = Lang::tgt;
    Lang answer_lang = Lang::tgt;

    bool operator==(const AttributeAssignment&) const = default;
};

// MONO           demonstrations fully in the target language
// OUT_CLT        demonstrations fully in the source language
// IN_CLT_TGT_A   source context, target question, target answer
// IN_CLT_SRC_A   source context, target question, source answer
// IN_CLT_SRC_Q   source context, source question, target answer (ablation)
inline const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{
        "MONO", "OUT_CLT", "IN_CLT_TGT_A", "IN_CLT_SRC_A", "IN_CLT_SRC_Q"};
    return names;
}

inline AttributeAssignment resolve_assignment(std::string_view method) {
    if (method == "MONO") return {Lang::tgt, Lang::tgt, Lang::tgt};
    if (method == "OUT_CLT") return {Lang::src, Lang::src, Lang::src};
    if (method == "IN_CLT_TGT_A") return {Lang::src, Lang::tgt, Lang::tgt};
    if (method == "IN_CLT_SRC_A") return {Lang::src, Lang::tgt, Lang::src};
    if (method == "IN_CLT_SRC_Q") return {Lang::src, Lang::src, Lang::tgt};
    throw util::ConfigError("unknown prompting method: " + std::string(method));
}

// ---------------------------------------------------------------------------
// Localization
// ---------------------------------------------------------------------------

// (language, label-key) -> label text. Lookups are strict by default; the
// fallback variant reports when it had to borrow another language's label
// so callers can surface the substitution instead of hiding it.
class LocalizationTable {
public:
    LocalizationTable() = default;

    static LocalizationTable from_json_file(const std::string& path) {
        nlohmann::json root;
        try {
            root = nlohmann::json::parse(util::read_text_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw util::DataError("malformed localization file " + path + ": " + e.what());
        }
        LocalizationTable table;
        for (auto& [language, entries] : root.items()) {
            for (auto& [key, value] : entries.items()) {
                table.set(language, key, value.get<std::string>());
            }
        }
        return table;
    }

    void set(const std::string& language, const std::string& key, std::string text) {
        entries_[language][key] = std::move(text);
    }

    bool has(const std::string& language, const std::string& key) const {
        auto lit = entries_.find(language);
        return lit != entries_.end() && lit->second.count(key) > 0;
    }

    const std::string& resolve(const std::string& language, const std::string& key) const {
        auto lit = entries_.find(language);
        if (lit != entries_.end()) {
            auto kit = lit->second.find(key);
            if (kit != lit->second.end()) return kit->second;
        }
        throw util::ConfigError("missing localization entry (" + language + ", " + key + ")");
    }

    struct Resolved {
        std::string text;
        bool used_fallback = false;
    };

    Resolved resolve_with_fallback(const std::string& language, const std::string& key,
                                   const std::string& fallback_language) const {
        if (has(language, key)) return {resolve(language, key), false};
        return {resolve(fallback_language, key), true};
    }

    std::vector<std::string> languages() const {
        std::vector<std::string> out;
        for (const auto& [language, _] : entries_) out.push_back(language);
        return out;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

enum class Attribute { context, question, answer };

inline Attribute attribute_from_string(std::string_view s) {
    if (s == "context") return Attribute::context;
    if (s == "question") return Attribute::question;
    if (s == "answer") return Attribute::answer;
    throw util::DataError("unknown template attribute: " + std::string(s));
}

// A template line is a sequence of parts:
//   label <key>  -> localized label text ("kind-question" dispatches to the
//                   cause-question / effect-question key per example kind)
//   lit <text>   -> literal text
//   field <name> -> example field (context, question, answer, sentence1,
//                   sentence2, choice1, choice2)
struct TemplatePart {
    enum class Kind { label, lit, field };
    Kind kind = Kind::lit;
    std::string value;
};

struct TemplateLine {
    Attribute attribute = Attribute::context;
    std::vector<TemplatePart> parts;
};

struct TaskTemplate {
    Task task = Task::qa;
    std::vector<TemplateLine> lines;
};

inline std::map<Task, TaskTemplate> load_templates(const std::string& path) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(util::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw util::DataError("malformed template file " + path + ": " + e.what());
    }
    std::map<Task, TaskTemplate> templates;
    for (auto& [task_name, lines] : root.items()) {
        TaskTemplate tmpl;
        tmpl.task = corpus::task_from_string(task_name);
        for (const auto& line : lines) {
            TemplateLine tl;
            tl.attribute = attribute_from_string(line.at("attribute").get<std::string>());
            for (const auto& part : line.at("parts")) {
                TemplatePart tp;
                std::string kind = part.at(0).get<std::string>();
                tp.value = part.at(1).get<std::string>();
                if (kind == "label") {
                    tp.kind = TemplatePart::Kind::label;
                } else if (kind == "lit") {
                    tp.kind = TemplatePart::Kind::lit;
                } else if (kind == "field") {
                    tp.kind = TemplatePart::Kind::field;
                } else {
                    throw util::DataError(path + ": unknown template part kind '" + kind + "'");
                }
                tl.parts.push_back(std::move(tp));
            }
            tmpl.lines.push_back(std::move(tl));
        }
        templates[tmpl.task] = std::move(tmpl);
    }
    if (templates.empty()) throw util::DataError("no templates in " + path);
    return templates;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

// Languages of one rendering: the ISO codes behind the src/tgt slots.
struct LanguagePair {
    std::string source;
    std::string target;

    const std::string& code(Lang lang) const { return lang == Lang::src ? source : target; }
};

namespace detail {

inline std::string example_field(const Example& ex, const std::string& name,
                                 const LocalizationTable& loc, const std::string& lang_code) {
    if (name == "context") return ex.context;
    if (name == "question") return ex.question;
    if (name == "answer") {
        // Classification labels are re-verbalized in the rendering language;
        // free-text answers (QA spans, XCOPA options) are used as stored.
        if (auto key = ex.extra("label_key")) return loc.resolve(lang_code, *key);
        if (ex.gold_answers.empty()) {
            throw util::DataError("example " + ex.id + " has no gold answer to render");
        }
        return ex.gold_answers.front();
    }
    if (auto v = ex.extra(name)) return *v;
    throw util::DataError("example " + ex.id + " lacks template field '" + name + "'");
}

inline std::string label_key_for(const Example& ex, const std::string& key) {
    if (key == "kind-question") {
        auto kind = ex.extra("kind");
        if (!kind) {
            throw util::DataError("example " + ex.id + " lacks the 'kind' extra required by the template");
        }
        return *kind + "-question";
    }
    return key;
}

inline void rstrip_in_place(std::string& s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
}

}  // namespace detail

// Renders one demonstration (or the query when `as_query`). Each template
// line draws every part — label and field alike — from the language its
// attribute is assigned to; a query ignores the assignment, renders fully in
// the target language, and stops right after the answer label (no answer).
//
// `src` may be null when the assignment never references the source side
// (e.g. MONO or any query).
inline std::string render_example(const Example* src, const Example& tgt,
                                  const TaskTemplate& tmpl, const AttributeAssignment& assignment,
                                  const LocalizationTable& loc, const LanguagePair& languages,
                                  bool as_query) {
    if (tgt.task != tmpl.task) {
        throw util::ConfigError("template for task '" + corpus::to_string(tmpl.task) +
                                "' applied to example of task '" + corpus::to_string(tgt.task) +
                                "'");
    }
    std::vector<std::string> lines;
    for (const TemplateLine& line : tmpl.lines) {
        Lang line_lang = Lang::tgt;
        if (!as_query) {
            switch (line.attribute) {
                case Attribute::context: line_lang = assignment.context_lang; break;
                case Attribute::question: line_lang = assignment.question_lang; break;
                case Attribute::answer: line_lang = assignment.answer_lang; break;
            }
        }
        const Example* chosen = (line_lang == Lang::src) ? src : &tgt;
        if (chosen == nullptr) {
            throw util::ConfigError("source-language rendering requested for example '" + tgt.id +
                                    "' but no source example was provided");
        }
        const Example& ex = *chosen;
        const std::string& lang_code = languages.code(line_lang);

        std::string rendered;
        for (const TemplatePart& part : line.parts) {
            if (as_query && line.attribute == Attribute::answer &&
                part.kind == TemplatePart::Kind::field) {
                // The query ends with the bare answer label: drop the field
                // and any separator spacing directly before it.
                detail::rstrip_in_place(rendered);
                break;
            }
            switch (part.kind) {
                case TemplatePart::Kind::lit:
                    rendered += part.value;
                    break;
                case TemplatePart::Kind::label:
                    rendered += loc.resolve(lang_code, detail::label_key_for(ex, part.value));
                    break;
                case TemplatePart::Kind::field:
                    rendered += detail::example_field(ex, part.value, loc, lang_code);
                    break;
            }
        }
        lines.push_back(std::move(rendered));
    }
    return util::join(lines, "\n");
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

// A demonstration is a parallel pair: the source-language original and its
// target-language counterpart (same id). MONO never touches the source side,
// so `source` may be null there.
struct DemoPair {
    const Example* source = nullptr;
    const Example* target = nullptr;
};

struct PromptOptions {
    std::string separator = "\n\n";  // between demonstrations and before the query
};

// Concatenates the first k rendered demonstrations (bucket order) and the
// rendered query. k = 0 yields the query alone. The query suffix is
// byte-identical across methods by construction.
inline std::string build_prompt(const std::string& method, const std::vector<DemoPair>& demos,
                                const Example& query, int k, const TaskTemplate& tmpl,
                                const LocalizationTable& loc, const LanguagePair& languages,
                                const PromptOptions& options = {}) {
    if (k < 0) throw util::ConfigError("shot count k must be >= 0");
    if (k > static_cast<int>(demos.size())) {
        throw util::ConfigError("requested k=" + std::to_string(k) + " shots but only " +
                                std::to_string(demos.size()) + " demonstrations are available");
    }
    AttributeAssignment assignment = resolve_assignment(method);
    std::string prompt;
    for (int i = 0; i < k; ++i) {
        const DemoPair& pair = demos[static_cast<std::size_t>(i)];
        if (pair.target == nullptr) {
            throw util::ConfigError("demonstration " + std::to_string(i) + " lacks a target example");
        }
        prompt += render_example(pair.source, *pair.target, tmpl, assignment, loc, languages,
                                 /*as_query=*/false);
        prompt += options.separator;
    }
    prompt += render_example(nullptr, query, tmpl, assignment, loc, languages, /*as_query=*/true);
    return prompt;
}

}  // namespace clteval::prompt
