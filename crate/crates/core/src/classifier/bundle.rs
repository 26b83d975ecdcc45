use serde::{Deserialize, Serialize};

use super::{Label, SvmModel};
use crate::corpus::CorpusId;
use crate::embedding::EmbeddingProvider;
use crate::error::Result;
use crate::segment::SentenceSpan;

/// Per-paper insight sentences: the Resolved and Finding sentences joined in
/// document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsightBundle {
    pub paper_id: CorpusId,
    pub resolved_text: String,
    pub finding_text: String,
    /// Sentence indices (into the paper's segmentation) behind each text.
    pub resolved_sentences: Vec<usize>,
    pub finding_sentences: Vec<usize>,
    /// True when the paper has neither Resolved nor Finding sentences.
    pub flagged: bool,
}

impl InsightBundle {
    pub fn from_labels(paper_id: CorpusId, sentences: &[SentenceSpan], labels: &[Label]) -> Self {
        let mut resolved = Vec::new();
        let mut finding = Vec::new();
        let mut resolved_sentences = Vec::new();
        let mut finding_sentences = Vec::new();
        for (s, l) in sentences.iter().zip(labels) {
            match l {
                Label::Resolved => {
                    resolved.push(s.text.as_str());
                    resolved_sentences.push(s.index);
                }
                Label::Finding => {
                    finding.push(s.text.as_str());
                    finding_sentences.push(s.index);
                }
                Label::Neutral => {}
            }
        }
        InsightBundle {
            paper_id,
            resolved_text: resolved.join(" "),
            finding_text: finding.join(" "),
            flagged: resolved_sentences.is_empty() && finding_sentences.is_empty(),
            resolved_sentences,
            finding_sentences,
        }
    }
}

pub trait SentenceClassifier {
    fn classify_sentences(&self, sentences: &[&str]) -> Result<Vec<Label>>;
}

/// Embeds sentences with `provider` and labels them with `model`.
/// Sentences without content words embed to the zero vector and are Neutral.
pub struct EmbeddingClassifier<'a> {
    pub model: &'a SvmModel,
    pub provider: &'a dyn EmbeddingProvider,
}

impl SentenceClassifier for EmbeddingClassifier<'_> {
    fn classify_sentences(&self, sentences: &[&str]) -> Result<Vec<Label>> {
        self.provider
            .embed_batch(sentences)?
            .iter()
            .map(|v| {
                if v.zero {
                    Ok(Label::Neutral)
                } else {
                    self.model.classify(v)
                }
            })
            .collect()
    }
}

/// Classifies every sentence of every paper and assembles one bundle per
/// paper, ordered by paper id.
pub fn extract_insight_bundles(
    papers: &[(CorpusId, Vec<SentenceSpan>)],
    classifier: &dyn SentenceClassifier,
) -> Result<Vec<InsightBundle>> {
    let mut bundles = Vec::with_capacity(papers.len());
    for (paper_id, sentences) in papers {
        let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
        let labels = classifier.classify_sentences(&texts)?;
        bundles.push(InsightBundle::from_labels(*paper_id, sentences, &labels));
    }
    bundles.sort_by_key(|b| b.paper_id);
    Ok(bundles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::segment;

    struct ByPrefix;

    impl SentenceClassifier for ByPrefix {
        fn classify_sentences(&self, sentences: &[&str]) -> Result<Vec<Label>> {
            Ok(sentences
                .iter()
                .map(|s| match s.chars().next() {
                    Some('R') => Label::Resolved,
                    Some('F') => Label::Finding,
                    _ => Label::Neutral,
                })
                .collect())
        }
    }

    #[test]
    fn concatenates_same_label_sentences_in_order() {
        let spans = segment(4, "Resolved one. Neutral two. Finding three. Resolved four.");
        let b = extract_insight_bundles(&[(4, spans)], &ByPrefix).unwrap();
        assert_eq!(b[0].resolved_text, "Resolved one. Resolved four.");
        assert_eq!(b[0].finding_text, "Finding three.");
        assert_eq!(b[0].resolved_sentences, vec![0, 3]);
        assert_eq!(b[0].finding_sentences, vec![2]);
        assert!(!b[0].flagged);
    }

    #[test]
    fn all_neutral_paper_is_flagged() {
        let spans = segment(1, "Nothing here. Nothing there.");
        let b = extract_insight_bundles(&[(1, spans), (0, Vec::new())], &ByPrefix).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].paper_id, 0);
        assert!(b.iter().all(|b| b.flagged && b.resolved_text.is_empty() && b.finding_text.is_empty()));
    }
}
