use std::collections::{BTreeSet, HashSet};

use insightkg_core::relevance::RelevanceMatrix;
use insightkg_core::trees::{
    build_inheritance_forest, build_relevance_forest, ExpansionOrder, Forest, ForestOptions, TreeParams,
};
use insightkg_oracles::gen;
use insightkg_oracles::trees::{self as reference, RefForest};
use proptest::prelude::*;

fn flatten(f: &Forest) -> RefForest {
    f.trees
        .iter()
        .map(|t| t.nodes.iter().map(|n| (n.paper_id, n.parent, n.depth)).collect())
        .collect()
}

/// BFS emits nodes level by level per parent; the oracle emits them level by
/// level too, so construction order must match exactly.
#[test]
fn inheritance_matches_reference_on_random_dags() {
    let mut r = gen::rng(0x1ee7);
    for case in 0..100 {
        let (papers, edges) = gen::citation_dag(&mut r, 12);
        let (n, m, t) = gen::tree_params(&mut r);
        let set: BTreeSet<_> = edges.iter().copied().collect();
        let params = TreeParams::new(n, m, t).unwrap();
        let (ours, _) = build_inheritance_forest(&papers, &set, params, None, ExpansionOrder::Bfs).unwrap();
        let expected = reference::inheritance(&papers, &edges, n, m, t);
        assert_eq!(flatten(&ours), expected, "case {case}: N={n} M={m} T={t} edges={edges:?}");
    }
}

#[test]
fn relevance_matches_reference_on_random_matrices() {
    let mut r = gen::rng(0xfeed);
    for case in 0..100 {
        let (ids, scores) = gen::masked_matrix(&mut r, 12);
        let (n, m, t) = gen::tree_params(&mut r);
        let matrix = RelevanceMatrix::from_entries(ids.clone(), scores.clone()).unwrap();
        let params = TreeParams::new(n, m, t).unwrap();
        let (ours, _) = build_relevance_forest(&matrix, params, ForestOptions::default()).unwrap();
        let expected = reference::relevance(&ids, &scores, n, m, t);
        assert_eq!(flatten(&ours), expected, "case {case}: N={n} M={m} T={t}");
    }
}

/// Chain values tuned so that the root p1 branches into p2 and p3, and the
/// strongest chains continue p2 -> p4 and p3 -> p7.
fn two_path_matrix() -> RelevanceMatrix {
    let mut rows = vec![vec![None; 7]; 7];
    let mut set = |from: usize, to: usize, v: f64| rows[from - 1][to - 1] = Some(v);
    for to in 2..=7 {
        set(1, to, 0.1);
    }
    set(1, 2, 0.8);
    set(1, 3, 0.7);
    for to in [1, 3, 6, 7] {
        set(2, to, 0.0);
    }
    set(2, 4, 0.9);
    set(2, 5, 0.6);
    for to in [1, 2, 4, 5] {
        set(3, to, 0.0);
    }
    set(3, 7, 0.85);
    set(3, 6, 0.5);
    for from in 4..=7 {
        for to in 1..=7 {
            if from != to {
                set(from, to, 0.05);
            }
        }
    }
    RelevanceMatrix::from_entries((1..=7).collect(), rows).unwrap()
}

#[test]
fn two_path_matrix_paths() {
    let (f, _) = build_relevance_forest(&two_path_matrix(), TreeParams::new(1, 2, 3).unwrap(), ForestOptions::default()).unwrap();
    assert_eq!(f.path_to(4).unwrap(), vec![1, 2, 4]);
    assert_eq!(f.path_to(7).unwrap(), vec![1, 3, 7]);
    assert_eq!(f.node(4).unwrap().score, 0.9);
    assert_eq!(f.node(7).unwrap().score, 0.85);
}

fn check_invariants(f: &Forest) {
    let mut seen = HashSet::new();
    for t in &f.trees {
        for (pos, node) in t.nodes.iter().enumerate() {
            assert!(seen.insert(node.paper_id), "paper {} used twice", node.paper_id);
            assert!(node.depth <= f.params.t_depth);
            if let Some(p) = node.parent {
                let parent_pos = t.nodes.iter().position(|n| n.paper_id == p).expect("parent in same tree");
                assert!(parent_pos < pos);
                assert_eq!(t.nodes[parent_pos].depth + 1, node.depth);
            } else {
                assert_eq!(pos, 0);
            }
        }
        for node in &t.nodes {
            let leaf_scores: Vec<f64> = t
                .nodes
                .iter()
                .filter(|n| n.parent == Some(node.paper_id))
                .map(|n| n.score)
                .collect();
            assert!(leaf_scores.windows(2).all(|w| w[0] >= w[1]), "leaf scores not ranked: {leaf_scores:?}");
        }
    }
    assert!(f.trees.len() <= f.params.n_roots);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relevance_forest_invariants_and_scale_stability(seed in any::<u64>(), halvings in 0i32..30, dfs in any::<bool>()) {
        // Power-of-two factors scale exactly, so tied averages stay tied.
        let factor = 2f64.powi(-halvings);
        let mut r = gen::rng(seed);
        let (ids, scores) = gen::masked_matrix(&mut r, 12);
        let (n, m, t) = gen::tree_params(&mut r);
        let params = TreeParams::new(n, m, t).unwrap();
        let order = if dfs { ExpansionOrder::Dfs } else { ExpansionOrder::Bfs };
        let options = ForestOptions { order, ..Default::default() };
        let base = RelevanceMatrix::from_entries(ids.clone(), scores.clone()).unwrap();
        let scaled_entries: Vec<Vec<Option<f64>>> = scores
            .iter()
            .map(|row| row.iter().map(|s| s.map(|v| v * factor)).collect())
            .collect();
        let scaled = RelevanceMatrix::from_entries(ids, scaled_entries).unwrap();
        let (a, ta) = build_relevance_forest(&base, params, options).unwrap();
        let (b, _) = build_relevance_forest(&scaled, params, options).unwrap();
        check_invariants(&a);
        prop_assert_eq!(flatten(&a), flatten(&b));
        let (again, tb) = build_relevance_forest(&base, params, options).unwrap();
        prop_assert_eq!(&a, &again);
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn inheritance_forest_invariants(seed in any::<u64>(), dfs in any::<bool>()) {
        let mut r = gen::rng(seed);
        let (papers, edges) = gen::citation_dag(&mut r, 12);
        let (n, m, t) = gen::tree_params(&mut r);
        let order = if dfs { ExpansionOrder::Dfs } else { ExpansionOrder::Bfs };
        let set: BTreeSet<_> = edges.into_iter().collect();
        let (f, trace) = build_inheritance_forest(&papers, &set, TreeParams::new(n, m, t).unwrap(), None, order).unwrap();
        check_invariants(&f);
        for (parent, child, _) in f.edges() {
            prop_assert!(set.contains(&(child, parent)), "edge {child}->{parent} is not a citation");
        }
        let chosen: usize = trace.steps.iter().map(|s| s.chosen.len()).sum();
        prop_assert_eq!(chosen, f.node_count());
        prop_assert!(trace.steps.iter().all(|s| s.depth <= t));
    }
}
