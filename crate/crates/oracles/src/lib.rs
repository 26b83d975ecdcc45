//! Reference implementations that test the production code from the outside.
//! Nothing here depends on `insightkg-core`.

pub mod dual;
pub mod gen;
pub mod trees;

/// Cosine similarity of two raw (not necessarily normalized) vectors, or
/// `None` when either has zero norm.
pub fn pairwise_cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na.sqrt() * nb.sqrt()))
    }
}
