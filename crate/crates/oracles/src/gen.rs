//! Seeded random fixtures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distinct, shuffled paper ids.
pub fn paper_ids(r: &mut ChaCha8Rng, n: usize) -> Vec<u64> {
    let mut ids: Vec<u64> = (0..n as u64).map(|i| 100 + i * 7 + r.gen_range(0..7)).collect();
    ids.shuffle(r);
    ids
}

/// Random citation DAG: a paper may only cite papers earlier in a hidden
/// publication order.
pub fn citation_dag(r: &mut ChaCha8Rng, max_n: usize) -> (Vec<u64>, Vec<(u64, u64)>) {
    let n = r.gen_range(1..=max_n);
    let ids = paper_ids(r, n);
    let density = r.gen_range(0.05..0.6);
    let mut edges = Vec::new();
    for later in 0..n {
        for earlier in 0..later {
            if r.gen_bool(density) {
                edges.push((ids[later], ids[earlier]));
            }
        }
    }
    edges.shuffle(r);
    (ids, edges)
}

/// Random masked score matrix. Scores are quantized to one decimal so that
/// ties are common.
pub fn masked_matrix(r: &mut ChaCha8Rng, max_n: usize) -> (Vec<u64>, Vec<Vec<Option<f64>>>) {
    let n = r.gen_range(2..=max_n);
    let mut ids = paper_ids(r, n);
    ids.sort_unstable();
    let mask_p = r.gen_range(0.0..0.7);
    let no_finding: Vec<bool> = (0..n).map(|_| r.gen_bool(mask_p / 2.0)).collect();
    let no_resolved: Vec<bool> = (0..n).map(|_| r.gen_bool(mask_p / 2.0)).collect();
    let scores = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j || no_finding[i] || no_resolved[j] {
                        None
                    } else {
                        Some((r.gen_range(-10..=10) as f64) / 10.0)
                    }
                })
                .collect()
        })
        .collect();
    (ids, scores)
}

/// (N, M, T) with N, M, T >= 1.
pub fn tree_params(r: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (r.gen_range(1..=4), r.gen_range(1..=3), r.gen_range(1..=4))
}

/// Binary classification problem in 2-D with both labels present.
pub fn binary_problem(r: &mut ChaCha8Rng, max_n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let n = r.gen_range(6..=max_n);
        let (wx, wy, b): (f64, f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-0.5..0.5));
        let noise = r.gen_range(0.0..0.3);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| {
                let s = wx * x[0] + wy * x[1] + b;
                let flip = r.gen_bool(noise);
                if (s > 0.0) != flip { 1.0 } else { -1.0 }
            })
            .collect();
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            return (xs, y);
        }
    }
}
