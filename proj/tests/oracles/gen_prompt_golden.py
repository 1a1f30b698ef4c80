#!/usr/bin/env python3
"""Independent prompt renderer: freezes golden prompt files for the test
suite from the template, localization, and fixture corpus files.

Deliberately re-implements the rendering rules from scratch (attribute-level
language assignment, localized labels, query truncation at the answer field)
so the goldens do not depend on the library under test.
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent.parent
FIX = ROOT / "tests" / "fixtures"
GOLD = FIX / "prompt_golden"

TEMPLATES = json.loads((ROOT / "data" / "templates.json").read_text(encoding="utf-8"))
LOC = json.loads((ROOT / "data" / "localization.json").read_text(encoding="utf-8"))

ASSIGNMENTS = {
    "MONO":         {"context": "tgt", "question": "tgt", "answer": "tgt"},
    "OUT_CLT":      {"context": "src", "question": "src", "answer": "src"},
    "IN_CLT_TGT_A": {"context": "src", "question": "tgt", "answer": "tgt"},
    "IN_CLT_SRC_A": {"context": "src", "question": "tgt", "answer": "src"},
    "IN_CLT_SRC_Q": {"context": "src", "question": "src", "answer": "tgt"},
}


# --- fixture loading (mirrors the documented file formats) -------------------

def load_qa(path, lang):
    data = json.loads(path.read_text(encoding="utf-8"))
    out = {}
    for article in data["data"]:
        for para in article["paragraphs"]:
            for qa in para["qas"]:
                out[qa["id"]] = {
                    "language": lang, "task": "qa",
                    "context": para["context"], "question": qa["question"],
                    "golds": [a["text"] for a in qa["answers"]], "extras": {},
                }
    return out


def load_pawsx(path, lang):
    out = {}
    rows = path.read_text(encoding="utf-8").splitlines()[1:]
    for row in rows:
        if not row:
            continue
        rid, s1, s2, label = row.split("\t")
        out[rid] = {
            "language": lang, "task": "paws-x",
            "context": s1 + "\n" + s2, "question": "",
            "golds": ["Yes" if label == "1" else "No"],
            "extras": {"sentence1": s1, "sentence2": s2,
                       "label_key": "yes" if label == "1" else "no"},
        }
    return out


def load_xnli(path, lang):
    key = {"entailment": "true", "contradiction": "false", "neutral": "neither"}
    gold = {"entailment": "True", "contradiction": "False", "neutral": "Neither"}
    out = {}
    for row in path.read_text(encoding="utf-8").splitlines()[1:]:
        if not row:
            continue
        rid, premise, hypothesis, label = row.split("\t")
        out[rid] = {
            "language": lang, "task": "xnli",
            "context": premise, "question": hypothesis,
            "golds": [gold[label]], "extras": {"label_key": key[label]},
        }
    return out


def load_xcopa(path, lang):
    out = {}
    for row in path.read_text(encoding="utf-8").splitlines():
        if not row:
            continue
        rec = json.loads(row)
        chosen = rec["choice1"] if rec["label"] == 0 else rec["choice2"]
        out[rec["id"]] = {
            "language": lang, "task": "xcopa",
            "context": rec["premise"], "question": "",
            "golds": [chosen],
            "extras": {"choice1": rec["choice1"], "choice2": rec["choice2"],
                       "kind": rec["question"]},
        }
    return out


# --- rendering ---------------------------------------------------------------

def field_value(ex, name, code):
    if name == "context":
        return ex["context"]
    if name == "question":
        return ex["question"]
    if name == "answer":
        if "label_key" in ex["extras"]:
            return LOC[code][ex["extras"]["label_key"]]
        return ex["golds"][0]
    return ex["extras"][name]


def label_key_for(ex, key):
    if key == "kind-question":
        return ex["extras"]["kind"] + "-question"
    return key


def render(src_ex, tgt_ex, task, assignment, codes, as_query):
    lines = []
    for line in TEMPLATES[task]:
        lang = "tgt" if as_query else assignment[line["attribute"]]
        ex = src_ex if lang == "src" else tgt_ex
        code = codes[lang]
        rendered = ""
        done = False
        for kind, value in line["parts"]:
            if as_query and line["attribute"] == "answer" and kind == "field":
                rendered = rendered.rstrip(" \t")
                done = True
                break
            if kind == "lit":
                rendered += value
            elif kind == "label":
                rendered += LOC[code][label_key_for(ex, value)]
            else:
                rendered += field_value(ex, value, code)
        del done
        lines.append(rendered)
    return "\n".join(lines)


def build_prompt(method, demos, query, k, task, codes, separator="\n\n"):
    assignment = ASSIGNMENTS[method]
    parts = []
    for src_ex, tgt_ex in demos[:k]:
        parts.append(render(src_ex, tgt_ex, task, assignment, codes, as_query=False))
        parts.append(separator)
    parts.append(render(None, query, task, assignment, codes, as_query=True))
    return "".join(parts)


def main() -> None:
    GOLD.mkdir(parents=True, exist_ok=True)

    qa_en = load_qa(FIX / "qa_en.json", "en")
    qa_de = load_qa(FIX / "qa_de.json", "de")
    pawsx_de = load_pawsx(FIX / "pawsx_de.tsv", "de")
    xnli_en = load_xnli(FIX / "xnli_en.tsv", "en")
    xnli_de = load_xnli(FIX / "xnli_de.tsv", "de")
    xcopa_en = load_xcopa(FIX / "xcopa_en.jsonl", "en")
    xcopa_zh = load_xcopa(FIX / "xcopa_zh.jsonl", "zh")

    en_de = {"src": "en", "tgt": "de"}
    en_zh = {"src": "en", "tgt": "zh"}

    goldens = {
        "qa_in_clt_tgt_a_k2_de.txt": build_prompt(
            "IN_CLT_TGT_A",
            [(qa_en["q0"], qa_de["q0"]), (qa_en["q1"], qa_de["q1"])],
            qa_de["q2"], 2, "qa", en_de),
        "qa_mono_k0_de.txt": build_prompt("MONO", [], qa_de["q2"], 0, "qa", en_de),
        "pawsx_mono_k1_de.txt": build_prompt(
            "MONO", [(None, pawsx_de["p0"])], pawsx_de["p1"], 1, "paws-x", en_de),
        "xnli_out_clt_k1_de.txt": build_prompt(
            "OUT_CLT", [(xnli_en["n0"], xnli_de["n0"])], xnli_de["n2"], 1, "xnli", en_de),
        "xcopa_in_clt_src_a_k1_zh.txt": build_prompt(
            "IN_CLT_SRC_A", [(xcopa_en["x0"], xcopa_zh["x0"])], xcopa_zh["x1"], 1,
            "xcopa", en_zh),
    }
    for name, text in goldens.items():
        (GOLD / name).write_text(text, encoding="utf-8")
        print(f"--- {name} ---")
        print(text)
        print()


if __name__ == "__main__":
    main()
