//! Rule-replaying forest builders. Every decision rescans the raw inputs
//! (edge list or score matrix) instead of keeping indexes, and trees are
//! expanded level by level.

use std::collections::HashSet;

/// (node, parent, depth) triples in construction order, one list per tree.
pub type RefForest = Vec<Vec<(u64, Option<u64>, usize)>>;

fn cited_count(edges: &[(u64, u64)], paper: u64) -> usize {
    edges.iter().filter(|(_, cited)| *cited == paper).count()
}

/// Sort key: score descending, then id ascending.
fn rank(mut scored: Vec<(f64, u64)>) -> Vec<u64> {
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, id)| id).collect()
}

pub fn inheritance(papers: &[u64], edges: &[(u64, u64)], n_roots: usize, m_leaves: usize, t_depth: usize) -> RefForest {
    let mut selected: HashSet<u64> = HashSet::new();
    let mut forest = Vec::new();
    for _ in 0..n_roots {
        let remaining: Vec<(f64, u64)> = papers
            .iter()
            .filter(|p| !selected.contains(p))
            .map(|&p| (cited_count(edges, p) as f64, p))
            .collect();
        let Some(&root) = rank(remaining).first() else { break };
        selected.insert(root);
        let mut tree = vec![(root, None, 1)];
        let mut level = vec![root];
        let mut depth = 1;
        while depth < t_depth && !level.is_empty() {
            let mut next = Vec::new();
            for &node in &level {
                let citing: Vec<(f64, u64)> = papers
                    .iter()
                    .filter(|&&p| !selected.contains(&p) && edges.contains(&(p, node)))
                    .map(|&p| (cited_count(edges, p) as f64, p))
                    .collect();
                for leaf in rank(citing).into_iter().take(m_leaves) {
                    selected.insert(leaf);
                    tree.push((leaf, Some(node), depth + 1));
                    next.push(leaf);
                }
            }
            level = next;
            depth += 1;
        }
        forest.push(tree);
    }
    forest
}

/// `scores[i][j]` is `None` when masked. Papers are `ids[i]`.
pub fn relevance(ids: &[u64], scores: &[Vec<Option<f64>>], n_roots: usize, m_leaves: usize, t_depth: usize) -> RefForest {
    let n = ids.len();
    let average = |i: usize| -> Option<f64> {
        let vals: Vec<f64> = (0..n).filter(|&j| j != i).filter_map(|j| scores[i][j]).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let pos = |id: u64| ids.iter().position(|&x| x == id).unwrap();
    let mut selected: HashSet<u64> = HashSet::new();
    let mut forest = Vec::new();
    for _ in 0..n_roots {
        let remaining: Vec<(f64, u64)> = (0..n)
            .filter(|&i| !selected.contains(&ids[i]))
            .filter_map(|i| average(i).map(|a| (a, ids[i])))
            .collect();
        let Some(&root) = rank(remaining).first() else { break };
        selected.insert(root);
        let mut tree = vec![(root, None, 1)];
        let mut level = vec![root];
        let mut depth = 1;
        while depth < t_depth && !level.is_empty() {
            let mut next = Vec::new();
            for &node in &level {
                let i = pos(node);
                let chained: Vec<(f64, u64)> = (0..n)
                    .filter(|&j| j != i && !selected.contains(&ids[j]))
                    .filter_map(|j| scores[i][j].map(|s| (s, ids[j])))
                    .collect();
                for leaf in rank(chained).into_iter().take(m_leaves) {
                    selected.insert(leaf);
                    tree.push((leaf, Some(node), depth + 1));
                    next.push(leaf);
                }
            }
            level = next;
            depth += 1;
        }
        forest.push(tree);
    }
    forest
}
