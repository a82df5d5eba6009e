"""Brute-force EM/F1 oracle for the metric fixture; writes expected.json.

Normalization follows the official evaluator scripts (regex article
removal, string.punctuation / Unicode P* punctuation); token overlap is
computed by explicit pairwise matching.

    python3 fixtures/metrics/oracle.py
"""
import json
import re
import string
import sys
import unicodedata
from pathlib import Path

HERE = Path(__file__).parent
ARTICLES = {"en": ["a", "an", "the"], "es": ["el", "la", "los", "las", "un", "una", "unos", "unas", "del", "al"], "zh": []}
UNICODE_PUNCT = {chr(i) for i in range(sys.maxunicode + 1) if unicodedata.category(chr(i)).startswith("P")}


def is_han(ch):
    return unicodedata.name(ch, "").startswith("CJK UNIFIED IDEOGRAPH") or unicodedata.name(ch, "").startswith("CJK COMPATIBILITY IDEOGRAPH")


def mixed_segment(text):
    out, buf = [], ""
    for ch in text:
        if is_han(ch) or ch.isspace():
            if buf:
                out.append(buf)
                buf = ""
            if is_han(ch):
                out.append(ch)
        else:
            buf += ch
    if buf:
        out.append(buf)
    return out


def normalize(s, mode, lang):
    s = s.lower()
    punct = set(string.punctuation) if mode == "squad" else set(string.punctuation) | UNICODE_PUNCT
    s = "".join(ch for ch in s if ch not in punct)
    arts = ARTICLES["en"] if mode == "squad" else ARTICLES[lang]
    if arts:
        s = re.sub(r"\b(" + "|".join(arts) + r")\b", " ", s)
    if mode == "mlqa" and lang == "zh":
        return " ".join(mixed_segment(s))
    return " ".join(s.split())


def tokens(norm, mode, lang):
    if mode == "mlqa" and lang == "zh":
        return mixed_segment(norm)
    return norm.split()


def overlap(pred, gold):
    used = [False] * len(gold)
    n = 0
    for p in pred:
        for j, g in enumerate(gold):
            if not used[j] and p == g:
                used[j] = True
                n += 1
                break
    return n


def f1(pred, gold):
    if not pred and not gold:
        return 1.0
    common = overlap(pred, gold)
    if common == 0:
        return 0.0
    prec, rec = common / len(pred), common / len(gold)
    return 2 * prec * rec / (prec + rec)


def score(entries, mode):
    per = {}
    for qid, lang, golds, pred in sorted(entries):
        pn = normalize(pred, mode, lang)
        gns = [normalize(g, mode, lang) for g in golds]
        em = int(any(pn == g for g in gns))
        best = max(f1(tokens(pn, mode, lang), tokens(g, mode, lang)) for g in gns)
        per[qid] = {"em": em, "f1": best}
    n = len(per)
    return {
        "exact_match": 100.0 * sum(v["em"] for v in per.values()) / n,
        "f1": 100.0 * sum(v["f1"] for v in per.values()) / n,
        "total": n,
        "per_example": per,
    }


dataset = json.load(open(HERE / "dataset.json", encoding="utf-8"))
preds = json.load(open(HERE / "predictions.json", encoding="utf-8"))
entries = [
    (qa["id"], art["title"], [a["text"] for a in qa["answers"]], preds[qa["id"]])
    for art in dataset["data"]
    for para in art["paragraphs"]
    for qa in para["qas"]
]
expected = {
    "squad": score(entries, "squad"),
    "mlqa": {lang: score([e for e in entries if e[1] == lang], "mlqa") for lang in ARTICLES},
}
with open(HERE / "expected.json", "w", encoding="utf-8") as f:
    json.dump(expected, f, indent=1, ensure_ascii=False)
    f.write("\n")
