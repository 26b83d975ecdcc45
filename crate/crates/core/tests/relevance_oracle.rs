use insightkg_core::classifier::InsightBundle;
use insightkg_core::relevance::build_relevance_matrix;
use insightkg_core::embedding::HashTfidfEmbedder;
use insightkg_oracles::{gen, pairwise_cosine};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const VOCAB: &[&str] = &[
    "retrieval", "reasoning", "graph", "multi-hop", "question", "answering", "benchmark", "dataset",
    "entity", "passage", "reader", "retriever", "noise", "evidence", "chain", "supervision",
    "latency", "memory", "prompt", "decomposition",
];

fn random_text(r: &mut ChaCha8Rng) -> String {
    if r.gen_bool(0.2) {
        return String::new();
    }
    let n = r.gen_range(3..12);
    let words: Vec<&str> = (0..n).map(|_| *VOCAB.choose(r).unwrap()).collect();
    format!("{}.", words.join(" "))
}

fn random_bundles(r: &mut ChaCha8Rng) -> Vec<InsightBundle> {
    loop {
        let n = r.gen_range(2..=10);
        let ids = gen::paper_ids(r, n);
        let bundles: Vec<InsightBundle> = ids
            .into_iter()
            .map(|paper_id| {
                let finding_text = random_text(r);
                let resolved_text = random_text(r);
                InsightBundle {
                    paper_id,
                    flagged: finding_text.is_empty() && resolved_text.is_empty(),
                    finding_text,
                    resolved_text,
                    resolved_sentences: Vec::new(),
                    finding_sentences: Vec::new(),
                }
            })
            .collect();
        if bundles.iter().any(|b| !b.flagged) {
            return bundles;
        }
    }
}

#[test]
fn matrix_matches_pairwise_cosine_oracle() {
    let mut r = gen::rng(20);
    for case in 0..20 {
        let bundles = random_bundles(&mut r);
        let corpus: Vec<&str> = bundles
            .iter()
            .flat_map(|b| [b.finding_text.as_str(), b.resolved_text.as_str()])
            .collect();
        let provider = HashTfidfEmbedder::fit(1024, case, corpus).unwrap();
        let m = build_relevance_matrix(&bundles, &provider).unwrap();

        let mut sorted = bundles.clone();
        sorted.sort_by_key(|b| b.paper_id);
        assert_eq!(m.paper_ids(), sorted.iter().map(|b| b.paper_id).collect::<Vec<_>>());
        let n = sorted.len();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j {
                    None
                } else {
                    pairwise_cosine(
                        &provider.raw_features(&sorted[i].finding_text),
                        &provider.raw_features(&sorted[j].resolved_text),
                    )
                };
                match (m.get(i, j), expected) {
                    (Some(a), Some(b)) => {
                        assert!((a - b).abs() <= 1e-9, "case {case} ({i},{j}): {a} vs {b}");
                        assert!((-1.0..=1.0).contains(&a));
                    }
                    (a, b) => assert_eq!(a, b, "case {case} ({i},{j})"),
                }
            }
        }

        let empty_f = sorted.iter().filter(|b| b.finding_text.is_empty()).count();
        let empty_r = sorted.iter().filter(|b| b.resolved_text.is_empty()).count();
        let both = sorted
            .iter()
            .filter(|b| b.finding_text.is_empty() && b.resolved_text.is_empty())
            .count();
        // Overlap: off-diagonal cells (i, j) with an empty finding in i and an
        // empty resolved in j.
        let overlap = empty_f * empty_r - both;
        assert_eq!(m.masked_count(), (empty_f + empty_r) * (n - 1) - overlap + n, "case {case}");

        let mut shuffled = bundles.clone();
        shuffled.shuffle(&mut r);
        assert_eq!(build_relevance_matrix(&shuffled, &provider).unwrap(), m, "case {case}: order dependence");
    }
}
