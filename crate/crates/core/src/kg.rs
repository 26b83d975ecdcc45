//! Knowledge-graph assembly and canonical export.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::InsightBundle;
use crate::corpus::{CorpusId, PaperRecord};
use crate::error::{Error, Result};
use crate::text::{keyword_tokens, DocumentFrequency};
use crate::trees::{Forest, ForestKind};

pub const TOOLTIP_MAX_CHARS: usize = 600;
pub const DEFAULT_KEYWORDS: usize = 5;
pub const DEFAULT_VOCABULARY: usize = 3;

// Field order is alphabetical so that serializing the structs directly
// yields sorted keys.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgParams {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub topic: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTitle {
    pub issue_finding: String,
    pub issue_resolved: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgNode {
    pub id: CorpusId,
    pub label: String,
    pub title: NodeTitle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgEdge {
    pub arrows: String,
    pub from: CorpusId,
    pub label: String,
    pub title: String,
    pub to: CorpusId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub edges: Vec<KgEdge>,
    pub kind: ForestKind,
    pub nodes: Vec<KgNode>,
    pub params: KgParams,
}

/// TF-IDF keyword scoring over the topic subset. Each paper contributes one
/// document: its title plus its insight text.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordIndex {
    df: DocumentFrequency,
}

fn paper_tokens(title: &str, insight_text: &str) -> Vec<String> {
    let mut tokens = keyword_tokens(title);
    tokens.extend(keyword_tokens(insight_text));
    tokens
}

impl KeywordIndex {
    pub fn build(papers: &[PaperRecord]) -> Self {
        KeywordIndex {
            df: DocumentFrequency::from_token_docs(
                papers.iter().map(|p| paper_tokens(&p.title, &p.insight_text)),
            ),
        }
    }

    /// All candidate terms of a paper with their weights, best first; ties
    /// are alphabetical.
    pub fn ranked_terms(&self, title: &str, insight_text: &str) -> Vec<(String, f64)> {
        let mut terms: Vec<(String, f64)> = self
            .df
            .tfidf(&paper_tokens(title, insight_text))
            .into_iter()
            .collect();
        terms.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        terms
    }

    pub fn keywords(&self, paper: &PaperRecord, k: usize) -> Vec<String> {
        self.ranked_terms(&paper.title, &paper.insight_text)
            .into_iter()
            .take(k)
            .map(|(t, _)| t)
            .collect()
    }

    /// Terms in both papers' top-2k lists, ranked by summed weight (ties
    /// alphabetical), at most `k`.
    pub fn co_occurring_vocabulary(&self, a: &PaperRecord, b: &PaperRecord, k: usize) -> Vec<String> {
        let top = |p: &PaperRecord| -> BTreeMap<String, f64> {
            self.ranked_terms(&p.title, &p.insight_text)
                .into_iter()
                .take(2 * k)
                .collect()
        };
        let (ta, tb) = (top(a), top(b));
        let mut shared: Vec<(String, f64)> = ta
            .iter()
            .filter_map(|(t, wa)| tb.get(t).map(|wb| (t.clone(), wa + wb)))
            .collect();
        shared.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        shared.into_iter().take(k).map(|(t, _)| t).collect()
    }
}

/// `text` cut to `TOOLTIP_MAX_CHARS` characters, with "…" appended when cut.
pub fn truncate_tooltip(text: &str) -> String {
    match text.char_indices().nth(TOOLTIP_MAX_CHARS) {
        Some((byte, _)) => format!("{}…", &text[..byte]),
        None => text.to_owned(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KgOptions {
    pub keywords: usize,
    pub vocabulary: usize,
}

impl Default for KgOptions {
    fn default() -> Self {
        KgOptions {
            keywords: DEFAULT_KEYWORDS,
            vocabulary: DEFAULT_VOCABULARY,
        }
    }
}

/// Everything needed to decorate a forest: papers, bundles and the keyword
/// index, keyed by corpus id.
#[derive(Debug, Clone)]
pub struct KgContext {
    pub topic: String,
    papers: BTreeMap<CorpusId, PaperRecord>,
    bundles: BTreeMap<CorpusId, InsightBundle>,
    index: KeywordIndex,
}

impl KgContext {
    pub fn new(topic: &str, papers: &[PaperRecord], bundles: &[InsightBundle]) -> Self {
        KgContext {
            topic: topic.to_owned(),
            index: KeywordIndex::build(papers),
            papers: papers.iter().map(|p| (p.corpus_id, p.clone())).collect(),
            bundles: bundles.iter().map(|b| (b.paper_id, b.clone())).collect(),
        }
    }

    pub fn paper(&self, id: CorpusId) -> Option<&PaperRecord> {
        self.papers.get(&id)
    }

    pub fn bundle(&self, id: CorpusId) -> Option<&InsightBundle> {
        self.bundles.get(&id)
    }

    pub fn index(&self) -> &KeywordIndex {
        &self.index
    }

    fn lookup(&self, id: CorpusId) -> Result<(&PaperRecord, &InsightBundle)> {
        let paper = self.papers.get(&id).ok_or_else(|| Error::Assembly {
            paper_id: id,
            message: "paper is not in the subset".into(),
        })?;
        let bundle = self.bundles.get(&id).ok_or_else(|| Error::Assembly {
            paper_id: id,
            message: "no insight bundle".into(),
        })?;
        Ok((paper, bundle))
    }
}

/// Turns a forest into a knowledge graph. Inheritance edges run from the
/// citing child to the cited parent; relevance edges run from the parent
/// (whose finding is matched) to the child (whose resolution matches).
pub fn assemble_kg(forest: &Forest, ctx: &KgContext, options: KgOptions) -> Result<KnowledgeGraph> {
    let mut nodes = Vec::with_capacity(forest.node_count());
    for node in forest.nodes() {
        let (paper, bundle) = ctx.lookup(node.paper_id)?;
        let label = if paper.title.trim().is_empty() {
            format!("Paper {}", paper.corpus_id)
        } else {
            paper.title.clone()
        };
        nodes.push(KgNode {
            id: paper.corpus_id,
            label,
            title: NodeTitle {
                issue_finding: truncate_tooltip(&bundle.finding_text),
                issue_resolved: truncate_tooltip(&bundle.resolved_text),
                keywords: ctx.index.keywords(paper, options.keywords),
            },
        });
    }

    let mut edges = Vec::new();
    for (parent, child, score) in forest.edges() {
        let (p, _) = ctx.lookup(parent)?;
        let (c, _) = ctx.lookup(child)?;
        let (from, to, title) = match forest.kind {
            ForestKind::Inheritance => (child, parent, format!("{child} cites {parent}")),
            ForestKind::Relevance => (parent, child, format!("{score:.4}")),
        };
        edges.push(KgEdge {
            arrows: "to".into(),
            from,
            label: ctx.index.co_occurring_vocabulary(c, p, options.vocabulary).join(", "),
            title,
            to,
        });
    }

    nodes.sort_by_key(|n| n.id);
    edges.sort_by_key(|e| (e.from, e.to));
    Ok(KnowledgeGraph {
        edges,
        kind: forest.kind,
        nodes,
        params: KgParams {
            m: forest.params.m_leaves,
            n: forest.params.n_roots,
            t: forest.params.t_depth,
            topic: ctx.topic.clone(),
        },
    })
}

/// Canonical JSON: sorted keys, nodes by id, edges by (from, to), two-space
/// indentation and a trailing newline.
pub fn export_kg(kg: &KnowledgeGraph) -> Result<String> {
    let mut kg = kg.clone();
    kg.nodes.sort_by_key(|n| n.id);
    kg.edges.sort_by_key(|e| (e.from, e.to));
    let mut out = serde_json::to_string_pretty(&kg)?;
    out.push('\n');
    Ok(out)
}
