"""Builds the 7-paper citation fixture and its expected inheritance KG.

The expected KG is computed here with a separate implementation of the
keyword and co-occurring vocabulary rules, so it can serve as an oracle for
the Rust pipeline. Run from this directory: python3 make_fixture.py
"""
import json
import math
from pathlib import Path

HERE = Path(__file__).parent
STOPWORDS = {
    w.strip()
    for w in (HERE / "../../crates/core/data/stopwords.txt").read_text().splitlines()
    if w.strip() and not w.startswith("#")
}

# id: (title, conclusion sentences with labels, intro, cites)
PAPERS = {
    1: ("HotpotQA: A Dataset for Explainable Multi-hop Question Answering",
        [("R", "We collect a large dataset of multi-hop questions with supporting facts."),
         ("N", "The questions were written by crowd workers."),
         ("F", "Models still struggle to locate supporting facts across paragraphs.")],
        "Question answering needs reasoning over several documents.", []),
    2: ("Reading Comprehension over HotpotQA Paragraphs",
        [("R", "Our reader network links paragraphs through bridge entities."),
         ("F", "Single hop shortcuts inflate reading comprehension scores.")],
        "Reading comprehension models read paragraphs jointly.", [1]),
    3: ("A HotpotQA Benchmark for Open-Domain Retrieval",
        [("R", "The benchmark measures retrieval of supporting paragraphs."),
         ("F", "Retrieval errors propagate to the reader.")],
        "Open-domain retrieval precedes answering.", [1, 99]),
    4: ("Evaluation Metrics for HotpotQA Reading Comprehension",
        [("R", "We propose evaluation metrics that penalize single hop shortcuts."),
         ("N", "Metrics are computed per question.")],
        "Evaluation of reading comprehension is noisy.", [2, None]),
    5: ("Graph Networks for Multi-hop Reasoning on HotpotQA",
        [("R", "Graph networks propagate evidence between entities."),
         ("F", "Graph construction remains expensive.")],
        "Graphs model entity links.", [1, 2]),
    6: ("Single-hop Decomposition of HotpotQA Questions",
        [("R", "Decomposition turns multi-hop questions into single-hop questions."),
         ("F", "Decomposition quality limits accuracy.")],
        "Complex questions can be decomposed.", [1, 3]),
    7: ("Iterative Retrieval for HotpotQA",
        [("R", "Iteratively expanding queries improves retrieval recall."),
         ("F", "Iterative retrieval increases latency.")],
        "Retrieval can be repeated with reformulated queries.", [3]),
}


def document(pid, title, sents, intro, cites):
    parts, headers, paras = [], [], []

    def add(s, bucket):
        start = sum(len(p) for p in parts)
        parts.append(s)
        bucket.append({"start": start, "end": start + len(s)})
        parts.append("\n")

    add("Introduction", headers)
    add(intro, paras)
    add("Conclusion", headers)
    add(" ".join(s for _, s in sents), paras)
    bib = [{"key": f"b{i}", "cited_corpusid": c} for i, c in enumerate(cites)]
    return {
        "corpusid": pid,
        "title": title,
        "text": "".join(parts),
        "annotations": {"section_headers": headers, "paragraphs": paras, "bibentry": bib},
        "year": 2018 + pid // 3,
    }


def tokens(text):
    text = text.lower()
    out, i = [], 0
    while i < len(text):
        if not text[i].isalnum():
            i += 1
            continue
        j = i
        while True:
            while j < len(text) and text[j].isalnum():
                j += 1
            if j + 1 < len(text) and text[j] == "-" and text[j + 1].isalnum():
                j += 1
                continue
            break
        tok = text[i:j]
        if len(tok) > 1 and not all(c.isdigit() or c == "-" for c in tok) and tok not in STOPWORDS:
            out.append(tok)
        i = j
    return out


def main():
    docs = [document(pid, *spec) for pid, spec in PAPERS.items()]
    docs.append({"corpusid": 50, "title": "Image Captioning", "text": "Conclusion\nCaptions.\n",
                 "annotations": {"section_headers": [{"start": 0, "end": 10}],
                                 "paragraphs": [{"start": 11, "end": 20}], "bibentry": []}})
    with open(HERE / "corpus.jsonl", "w") as f:
        for d in reversed(docs):
            f.write(json.dumps(d, ensure_ascii=False) + "\n")

    bundles = []
    for pid, (_, sents, _, _) in PAPERS.items():
        pick = lambda lab: [i for i, (l, _) in enumerate(sents) if l == lab]
        r, fi = pick("R"), pick("F")
        bundles.append({
            "paper_id": pid,
            "resolved_text": " ".join(sents[i][1] for i in r),
            "finding_text": " ".join(sents[i][1] for i in fi),
            "resolved_sentences": r,
            "finding_sentences": fi,
            "flagged": not r and not fi,
        })
    with open(HERE / "bundles.jsonl", "w") as f:
        for b in bundles:
            f.write(json.dumps(b, separators=(",", ":")) + "\n")

    # Keyword documents: title + insight text (the conclusion paragraph).
    kdocs = {pid: tokens(t) + tokens(" ".join(s for _, s in sents)) for pid, (t, sents, _, _) in PAPERS.items()}
    n = len(kdocs)
    df = {}
    for toks in kdocs.values():
        for t in set(toks):
            df[t] = df.get(t, 0) + 1

    def ranked(pid):
        toks = kdocs[pid]
        w = {t: toks.count(t) * (math.log((1 + n) / (1 + df[t])) + 1) for t in set(toks)}
        return sorted(w.items(), key=lambda kv: (-kv[1], kv[0]))

    def vocab(a, b, k=3):
        ta, tb = dict(ranked(a)[: 2 * k]), dict(ranked(b)[: 2 * k])
        shared = sorted(((t, ta[t] + tb[t]) for t in ta if t in tb), key=lambda kv: (-kv[1], kv[0]))
        return ", ".join(t for t, _ in shared[:k])

    tree = {1: None, 2: 1, 3: 1, 4: 2, 5: 2, 6: 3, 7: 3}
    by_id = {b["paper_id"]: b for b in bundles}
    kg = {
        "edges": sorted(
            ({"arrows": "to", "from": c, "label": vocab(c, p), "title": f"{c} cites {p}", "to": p}
             for c, p in tree.items() if p is not None),
            key=lambda e: (e["from"], e["to"])),
        "kind": "inheritance",
        "nodes": [{"id": pid, "label": PAPERS[pid][0],
                   "title": {"issue_finding": by_id[pid]["finding_text"],
                             "issue_resolved": by_id[pid]["resolved_text"],
                             "keywords": [t for t, _ in ranked(pid)[:5]]}}
                  for pid in sorted(tree)],
        "params": {"M": 2, "N": 1, "T": 3, "topic": "hotpotqa"},
    }
    (HERE / "kg_inheritance.golden.json").write_text(json.dumps(kg, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
