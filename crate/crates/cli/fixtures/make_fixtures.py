"""Generates the synthetic CLI fixtures. Run from this directory:

    python3 make_fixtures.py

Outputs:
  synth20/corpus.jsonl   20 topic papers plus 4 off-topic distractors
  synth20/labels.jsonl   small training set for the frozen model
  labels_1500.jsonl    label file with fixed per-split class counts
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).parent
TOPIC = "question answering"

SUBJECTS = [
    "retrieval", "passage ranking", "answer extraction", "entity linking", "query rewriting",
    "evidence aggregation", "reader calibration", "table reasoning", "numerical reasoning",
    "knowledge graphs", "dense indexing", "multi-hop chains", "answer verification",
    "question decomposition", "distant supervision", "document selection", "span prediction",
    "cross-lingual transfer", "dialogue context", "commonsense grounding",
]

RESOLVED = [
    "We propose a {s} module that improves exact match on open benchmarks.",
    "Our method for {s} reduces errors on long questions.",
    "We show that {s} with contrastive training raises recall.",
    "We introduce a {s} objective that outperforms strong baselines.",
    "This work presents a {s} model that solves compositional questions.",
]
FINDING = [
    "However, {s} still fails on adversarial questions.",
    "A limitation remains: {s} degrades when evidence is noisy.",
    "Future work should address the cost of {s} at scale.",
    "The {s} component remains a bottleneck for unanswerable questions.",
    "It is unclear whether {s} generalizes to new domains.",
]
NEUTRAL = [
    "Section four describes the {s} setup.",
    "The {s} experiments use the standard split.",
    "Table two lists the {s} statistics.",
    "All {s} runs were repeated three times.",
    "The appendix gives further {s} details.",
]
LABEL_OF = {"resolved": RESOLVED, "finding": FINDING, "neutral": NEUTRAL}


def sentence(rng, label, subject):
    return rng.choice(LABEL_OF[label]).format(s=subject)


def document(pid, title, intro, insight, cites, year):
    parts, headers, paras = [], [], []

    def add(s, bucket):
        start = sum(len(p) for p in parts)
        parts.append(s)
        bucket.append({"start": start, "end": start + len(s)})
        parts.append("\n")

    add("Introduction", headers)
    add(intro, paras)
    add("Conclusion", headers)
    add(insight, paras)
    return {
        "corpusid": pid,
        "title": title,
        "text": "".join(parts),
        "annotations": {
            "section_headers": headers,
            "paragraphs": paras,
            "bibentry": [
                {"key": f"b{i}", "cited_corpusid": c} for i, c in enumerate(cites)
            ],
        },
        "year": year,
    }


def corpus(rng):
    ids = list(range(101, 121))
    docs = []
    for k, pid in enumerate(ids):
        main = SUBJECTS[k]
        other = SUBJECTS[(k * 7 + 3) % len(SUBJECTS)]
        sents = [
            sentence(rng, "resolved", main),
            sentence(rng, "neutral", main),
            sentence(rng, "finding", other),
        ]
        if k % 3 == 0:
            sents.append(sentence(rng, "resolved", other))
        rng.shuffle(sents)
        earlier = ids[:k]
        cites = sorted(rng.sample(earlier, min(len(earlier), rng.randint(0, 3))))
        if k % 5 == 4:
            cites.append(999)  # outside the corpus
        docs.append(document(
            pid,
            f"{main.capitalize()} for {TOPIC.title()}",
            f"{TOPIC.capitalize()} systems rely on {main}.",
            " ".join(sents),
            cites,
            2015 + k % 8,
        ))
    for j, pid in enumerate([201, 202, 203, 204]):
        docs.append(document(
            pid,
            f"Image Segmentation Study {j}",
            "Segmentation masks are predicted per pixel.",
            "We propose a new decoder. Boundaries remain hard.",
            [101] if j == 0 else [],
            2019,
        ))
    return docs


def labels(rng, counts, subjects):
    rows = []
    for split, per_class in counts.items():
        for label, n in per_class.items():
            for i in range(n):
                subject = subjects[(i * 3 + len(rows)) % len(subjects)]
                rows.append({"text": sentence(rng, label, subject), "label": label, "split": split})
    rng.shuffle(rows)
    return rows


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    rng = random.Random(20240601)
    write_jsonl(HERE / "synth20/corpus.jsonl", corpus(rng))
    small = {
        "train": {"resolved": 40, "neutral": 40, "finding": 40},
        "test": {"resolved": 10, "neutral": 10, "finding": 10},
    }
    write_jsonl(HERE / "synth20/labels.jsonl", labels(rng, small, SUBJECTS))
    fixed_counts = {
        "train": {"resolved": 532, "neutral": 334, "finding": 259},
        "test": {"resolved": 165, "neutral": 121, "finding": 89},
    }
    write_jsonl(HERE / "labels_1500.jsonl", labels(rng, fixed_counts, SUBJECTS))


if __name__ == "__main__":
    main()
