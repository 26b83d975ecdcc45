//! Directed relevance matrix: `scores[i][j]` is the chain value from paper
//! i's Issue Finding text to paper j's Issue Resolved text.

use serde::{Deserialize, Serialize};

use crate::classifier::InsightBundle;
use crate::corpus::CorpusId;
use crate::embedding::{cosine, EmbeddingProvider};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    paper_ids: Vec<CorpusId>,
    scores: Vec<Vec<f64>>,
    valid: Vec<Vec<bool>>,
}

/// Which entries of a paper feed its average chain score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainAverage {
    /// The paper's row: its Finding matched against others' Resolved.
    #[default]
    Outgoing,
    /// The paper's column.
    Incoming,
    /// Row and column together.
    Both,
}

/// On-disk form. `mask[i][j]` is true for undefined entries, whose score is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixExport {
    pub paper_ids: Vec<CorpusId>,
    pub scores: Vec<Vec<f64>>,
    pub mask: Vec<Vec<bool>>,
}

impl RelevanceMatrix {
    /// Builds a matrix from explicit entries (`None` = undefined). Ids must be
    /// strictly ascending; the diagonal is always undefined.
    pub fn from_entries(paper_ids: Vec<CorpusId>, entries: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let n = paper_ids.len();
        if paper_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("paper ids must be unique and ascending"));
        }
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("score matrix must be square and match the id list"));
        }
        let mut scores = vec![vec![0.0; n]; n];
        let mut valid = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if let Some(s) = entries[i][j] {
                    if !(-1.0..=1.0).contains(&s) {
                        return Err(Error::invalid(format!("score {s} outside [-1, 1]")));
                    }
                    scores[i][j] = s;
                    valid[i][j] = true;
                }
            }
        }
        Ok(RelevanceMatrix {
            paper_ids,
            scores,
            valid,
        })
    }

    pub fn from_export(e: MatrixExport) -> Result<Self> {
        let entries = e
            .scores
            .iter()
            .zip(&e.mask)
            .map(|(row, mrow)| {
                row.iter()
                    .zip(mrow)
                    .map(|(&s, &masked)| (!masked).then_some(s))
                    .collect()
            })
            .collect();
        Self::from_entries(e.paper_ids, entries)
    }

    pub fn export(&self) -> MatrixExport {
        MatrixExport {
            paper_ids: self.paper_ids.clone(),
            scores: self.scores.clone(),
            mask: self
                .valid
                .iter()
                .map(|r| r.iter().map(|v| !v).collect())
                .collect(),
        }
    }

    pub fn paper_ids(&self) -> &[CorpusId] {
        &self.paper_ids
    }

    pub fn len(&self) -> usize {
        self.paper_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paper_ids.is_empty()
    }

    pub fn index_of(&self, id: CorpusId) -> Option<usize> {
        self.paper_ids.binary_search(&id).ok()
    }

    /// Score at matrix position, or `None` when undefined.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.valid[i][j].then(|| self.scores[i][j])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().flatten().filter(|v| **v).count()
    }

    pub fn masked_count(&self) -> usize {
        self.len() * self.len() - self.valid_count()
    }

    /// Valid outgoing chains of `id` as (target, score), in id order.
    pub fn row(&self, id: CorpusId) -> Result<Vec<(CorpusId, f64)>> {
        let i = self
            .index_of(id)
            .ok_or_else(|| Error::invalid(format!("paper {id} is not in the matrix")))?;
        Ok((0..self.len())
            .filter_map(|j| self.get(i, j).map(|s| (self.paper_ids[j], s)))
            .collect())
    }

    /// Arithmetic mean of the paper's valid entries, or `None` if it has none.
    pub fn average_chain_score(&self, id: CorpusId, mode: ChainAverage) -> Result<Option<f64>> {
        let i = self
            .index_of(id)
            .ok_or_else(|| Error::invalid(format!("paper {id} is not in the matrix")))?;
        Ok(self.average_at(i, mode))
    }

    pub(crate) fn average_at(&self, i: usize, mode: ChainAverage) -> Option<f64> {
        let n = self.len();
        let outgoing = (0..n).filter_map(|j| self.get(i, j));
        let incoming = (0..n).filter_map(|j| self.get(j, i));
        let (sum, count) = match mode {
            ChainAverage::Outgoing => fold(outgoing),
            ChainAverage::Incoming => fold(incoming),
            ChainAverage::Both => fold(outgoing.chain(incoming)),
        };
        (count > 0).then(|| sum / count as f64)
    }
}

fn fold(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values.fold((0.0, 0), |(s, c), v| (s + v, c + 1))
}

/// Embeds each paper's Finding and Resolved texts once and scores every
/// ordered pair. Entries involving an empty text are undefined.
pub fn build_relevance_matrix(
    bundles: &[InsightBundle],
    provider: &dyn EmbeddingProvider,
) -> Result<RelevanceMatrix> {
    if bundles.len() < 2 {
        return Err(Error::invalid("relevance matrix needs at least two papers"));
    }
    let mut sorted: Vec<&InsightBundle> = bundles.iter().collect();
    sorted.sort_by_key(|b| b.paper_id);
    if sorted.windows(2).any(|w| w[0].paper_id == w[1].paper_id) {
        return Err(Error::invalid("duplicate paper id among bundles"));
    }
    let findings: Vec<&str> = sorted.iter().map(|b| b.finding_text.as_str()).collect();
    let resolved: Vec<&str> = sorted.iter().map(|b| b.resolved_text.as_str()).collect();
    let finding_vecs = provider.embed_batch(&findings)?;
    let resolved_vecs = provider.embed_batch(&resolved)?;
    if finding_vecs.iter().chain(&resolved_vecs).all(|v| v.zero) {
        return Err(Error::EmptyMatrix);
    }

    let n = sorted.len();
    let mut entries = vec![vec![None; n]; n];
    for i in 0..n {
        if finding_vecs[i].zero {
            continue;
        }
        for j in 0..n {
            if i == j || resolved_vecs[j].zero {
                continue;
            }
            entries[i][j] = Some(cosine(&finding_vecs[i], &resolved_vecs[j])?);
        }
    }
    RelevanceMatrix::from_entries(sorted.iter().map(|b| b.paper_id).collect(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingVector, HashTfidfEmbedder};
    use std::collections::HashMap;

    fn bundle(id: CorpusId, finding: &str, resolved: &str) -> InsightBundle {
        InsightBundle {
            paper_id: id,
            resolved_text: resolved.into(),
            finding_text: finding.into(),
            resolved_sentences: Vec::new(),
            finding_sentences: Vec::new(),
            flagged: finding.is_empty() && resolved.is_empty(),
        }
    }

    /// Looks texts up in a fixed table of 3-d vectors.
    struct Stub(HashMap<&'static str, [f64; 3]>);

    impl EmbeddingProvider for Stub {
        fn tag(&self) -> &str {
            "stub"
        }
        fn dim(&self) -> usize {
            3
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
            Ok(texts
                .iter()
                .map(|t| match self.0.get(t) {
                    Some(v) => EmbeddingVector::normalized(v.to_vec(), "stub"),
                    None => EmbeddingVector::zero(3, "stub"),
                })
                .collect())
        }
    }

    #[test]
    fn identical_texts_chain_at_one() {
        let text = "iterative retrieval for multi-hop questions";
        let e = HashTfidfEmbedder::fit(256, 0, [text]).unwrap();
        let m = build_relevance_matrix(&[bundle(1, text, text), bundle(2, text, text)], &e).unwrap();
        assert!((m.get(0, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.get(1, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 0), None);
    }

    #[test]
    fn empty_finding_masks_whole_row() {
        let e = HashTfidfEmbedder::fit(256, 0, ["a b"]).unwrap();
        let m = build_relevance_matrix(
            &[bundle(1, "", "graph reasoning"), bundle(2, "graph reasoning", "graph reasoning"), bundle(3, "x ray", "")],
            &e,
        )
        .unwrap();
        assert!(m.row(1).unwrap().is_empty());
        assert_eq!(m.row(2).unwrap().len(), 1);
        assert!(m.get(1, 2).is_none());
    }

    #[test]
    fn three_paper_stub_matches_hand_dot_products() {
        let stub = Stub(HashMap::from([
            ("f1", [1.0, 0.0, 0.0]),
            ("f2", [0.0, 1.0, 0.0]),
            ("f3", [0.6, 0.8, 0.0]),
            ("r1", [0.0, 0.0, 1.0]),
            ("r2", [0.6, 0.0, 0.8]),
            ("r3", [0.0, 0.6, 0.8]),
        ]));
        let m = build_relevance_matrix(
            &[bundle(3, "f3", "r3"), bundle(1, "f1", "r1"), bundle(2, "f2", "r2")],
            &stub,
        )
        .unwrap();
        assert_eq!(m.paper_ids(), &[1, 2, 3]);
        // Hand-computed f_i . r_j for i != j.
        let expected = [
            [None, Some(0.6), Some(0.0)],
            [Some(0.0), None, Some(0.6)],
            [Some(0.0), Some(0.36), None],
        ];
        for i in 0..3 {
            for j in 0..3 {
                match (m.get(i, j), expected[i][j]) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "({i},{j}) {a} vs {b}"),
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }

    #[test]
    fn all_empty_bundles_are_an_error() {
        let e = HashTfidfEmbedder::fit(64, 0, ["x"]).unwrap();
        let err = build_relevance_matrix(&[bundle(1, "", ""), bundle(2, "", "")], &e).unwrap_err();
        assert!(matches!(err, Error::EmptyMatrix));
        assert!(build_relevance_matrix(&[bundle(1, "a", "b")], &e).is_err());
    }

    #[test]
    fn averages() {
        let m = RelevanceMatrix::from_entries(
            vec![1, 2, 3],
            vec![
                vec![None, Some(0.2), Some(0.4)],
                vec![None, None, None],
                vec![Some(-0.5), Some(0.1), None],
            ],
        )
        .unwrap();
        let avg = |id, mode| m.average_chain_score(id, mode).unwrap();
        assert!((avg(1, ChainAverage::Outgoing).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(avg(2, ChainAverage::Outgoing), None);
        assert!((avg(2, ChainAverage::Incoming).unwrap() - 0.15).abs() < 1e-12);
        assert!((avg(1, ChainAverage::Both).unwrap() - (0.2 + 0.4 - 0.5) / 3.0).abs() < 1e-12);
        assert!(m.average_chain_score(9, ChainAverage::Outgoing).is_err());
    }

    #[test]
    fn four_paper_averages_match_manual_recomputation() {
        let rows = vec![
            vec![None, Some(0.9), Some(0.1), Some(-0.2)],
            vec![Some(0.3), None, None, Some(0.5)],
            vec![None, None, None, None],
            vec![Some(0.25), Some(0.25), Some(0.7), None],
        ];
        let m = RelevanceMatrix::from_entries(vec![10, 20, 30, 40], rows).unwrap();
        let expected = [Some(0.8 / 3.0), Some(0.4), None, Some(0.4)];
        for (id, want) in [10, 20, 30, 40].into_iter().zip(expected) {
            let got = m.average_chain_score(id, ChainAverage::Outgoing).unwrap();
            match (got, want) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn export_round_trip_and_mask_semantics() {
        let m = RelevanceMatrix::from_entries(vec![1, 2], vec![vec![None, Some(0.5)], vec![None, None]]).unwrap();
        let e = m.export();
        assert_eq!(e.mask, vec![vec![true, false], vec![true, true]]);
        assert_eq!(RelevanceMatrix::from_export(e).unwrap(), m);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(RelevanceMatrix::from_entries(vec![2, 1], vec![vec![None; 2]; 2]).is_err());
        assert!(RelevanceMatrix::from_entries(vec![1, 2], vec![vec![None, Some(1.5)], vec![None; 2]]).is_err());
    }
}
