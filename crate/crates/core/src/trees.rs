//! Inheritance and Relevance forests.
//!
//! Both forests share the same growth rules: roots are picked one at a time
//! from the best unselected candidates, each node takes at most M unselected
//! leaves, a paper is used at most once across the whole forest, and depth
//! never exceeds T. Ranking is score descending, then corpus id ascending.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{in_citation_counts, CorpusId};
use crate::error::{Error, Result};
use crate::relevance::{ChainAverage, RelevanceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum number of root papers.
    #[serde(rename = "N")]
    pub n_roots: usize,
    /// Maximum leaves per node.
    #[serde(rename = "M")]
    pub m_leaves: usize,
    /// Maximum depth; a root has depth 1.
    #[serde(rename = "T")]
    pub t_depth: usize,
}

impl TreeParams {
    pub fn new(n_roots: usize, m_leaves: usize, t_depth: usize) -> Result<Self> {
        let p = TreeParams {
            n_roots,
            m_leaves,
            t_depth,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("N", self.n_roots), ("M", self.m_leaves), ("T", self.t_depth)] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForestKind {
    Inheritance,
    Relevance,
}

impl ForestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ForestKind::Inheritance => "inheritance",
            ForestKind::Relevance => "relevance",
        }
    }
}

impl std::str::FromStr for ForestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inheritance" => Ok(ForestKind::Inheritance),
            "relevance" => Ok(ForestKind::Relevance),
            other => Err(Error::invalid(format!("unknown forest kind {other:?}"))),
        }
    }
}

/// Order in which selected leaves are expanded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionOrder {
    #[default]
    Bfs,
    Dfs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestNode {
    pub paper_id: CorpusId,
    pub parent: Option<CorpusId>,
    pub depth: usize,
    /// Score the node was ranked by: an in-citation count for inheritance
    /// nodes, the chain value from the parent for relevance leaves, and the
    /// average chain score for relevance roots.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Construction order; `nodes[0]` is the root.
    pub nodes: Vec<ForestNode>,
}

impl Tree {
    pub fn root(&self) -> CorpusId {
        self.nodes[0].paper_id
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Children of `id` in the order they were selected.
    pub fn children(&self, id: CorpusId) -> Vec<CorpusId> {
        self.nodes
            .iter()
            .filter(|n| n.parent == Some(id))
            .map(|n| n.paper_id)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub kind: ForestKind,
    pub params: TreeParams,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn nodes(&self) -> impl Iterator<Item = &ForestNode> {
        self.trees.iter().flat_map(|t| t.nodes.iter())
    }

    pub fn node(&self, id: CorpusId) -> Option<&ForestNode> {
        self.nodes().find(|n| n.paper_id == id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes().count()
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    /// (parent, child, child score) for every non-root node.
    pub fn edges(&self) -> Vec<(CorpusId, CorpusId, f64)> {
        self.nodes()
            .filter_map(|n| n.parent.map(|p| (p, n.paper_id, n.score)))
            .collect()
    }

    /// Root-to-node path of ids, or `None` if `id` is not in the forest.
    pub fn path_to(&self, id: CorpusId) -> Option<Vec<CorpusId>> {
        let parents: BTreeMap<CorpusId, Option<CorpusId>> =
            self.nodes().map(|n| (n.paper_id, n.parent)).collect();
        let mut cur = *parents.get(&id)?;
        let mut path = vec![id];
        while let Some(p) = cur {
            path.push(p);
            cur = parents[&p];
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CorpusId,
    pub score: f64,
}

/// One selection decision: a root pick (`parent` is `None`) or the expansion
/// of `parent`. `candidates` are ranked; `chosen[m - 1]` is leaf m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Tree sequence number n, starting at 1.
    pub tree: usize,
    /// Depth t of the chosen nodes.
    pub depth: usize,
    pub parent: Option<CorpusId>,
    pub candidates: Vec<Candidate>,
    pub chosen: Vec<CorpusId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForestBuildTrace {
    pub steps: Vec<TraceStep>,
}

impl ForestBuildTrace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut w, step)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestOptions {
    #[serde(default)]
    pub order: ExpansionOrder,
    #[serde(default)]
    pub chain_average: ChainAverage,
}

fn ranked(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    cands.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    cands
}

fn grow<R, C>(
    kind: ForestKind,
    params: TreeParams,
    order: ExpansionOrder,
    root_candidates: R,
    children: C,
) -> Result<(Forest, ForestBuildTrace)>
where
    R: Fn(&HashSet<CorpusId>) -> Vec<Candidate>,
    C: Fn(CorpusId, &HashSet<CorpusId>) -> Vec<Candidate>,
{
    params.validate()?;
    let mut selected = HashSet::new();
    let mut trees = Vec::new();
    let mut trace = ForestBuildTrace::default();

    for n in 1..=params.n_roots {
        let cands = ranked(root_candidates(&selected));
        let Some(root) = cands.first().cloned() else { break };
        selected.insert(root.id);
        trace.steps.push(TraceStep {
            tree: n,
            depth: 1,
            parent: None,
            candidates: cands,
            chosen: vec![root.id],
        });
        let mut nodes = vec![ForestNode {
            paper_id: root.id,
            parent: None,
            depth: 1,
            score: root.score,
        }];
        // Pending expansions: BFS pops the front, DFS the back.
        let mut pending = VecDeque::from([(root.id, 1usize)]);
        while let Some((node, depth)) = match order {
            ExpansionOrder::Bfs => pending.pop_front(),
            ExpansionOrder::Dfs => pending.pop_back(),
        } {
            if depth >= params.t_depth {
                continue;
            }
            let cands = ranked(children(node, &selected));
            if cands.is_empty() {
                continue;
            }
            let chosen: Vec<Candidate> = cands.iter().take(params.m_leaves).cloned().collect();
            for c in &chosen {
                selected.insert(c.id);
                nodes.push(ForestNode {
                    paper_id: c.id,
                    parent: Some(node),
                    depth: depth + 1,
                    score: c.score,
                });
            }
            match order {
                ExpansionOrder::Bfs => pending.extend(chosen.iter().map(|c| (c.id, depth + 1))),
                ExpansionOrder::Dfs => pending.extend(chosen.iter().rev().map(|c| (c.id, depth + 1))),
            }
            trace.steps.push(TraceStep {
                tree: n,
                depth: depth + 1,
                parent: Some(node),
                candidates: cands,
                chosen: chosen.iter().map(|c| c.id).collect(),
            });
        }
        trees.push(Tree { nodes });
    }
    Ok((Forest { kind, params, trees }, trace))
}

/// Builds the Inheritance forest over `papers`. Papers are ranked by their
/// in-citation count within `edges` (`(citing, cited)` pairs), or by
/// `global_counts` when supplied (missing ids count 0). A node's candidate
/// leaves are the unselected papers that cite it.
pub fn build_inheritance_forest(
    papers: &[CorpusId],
    edges: &BTreeSet<(CorpusId, CorpusId)>,
    params: TreeParams,
    global_counts: Option<&BTreeMap<CorpusId, u64>>,
    order: ExpansionOrder,
) -> Result<(Forest, ForestBuildTrace)> {
    let ids: BTreeSet<CorpusId> = papers.iter().copied().collect();
    if let Some(&(a, b)) = edges.iter().find(|(a, b)| !ids.contains(a) || !ids.contains(b)) {
        return Err(Error::invalid(format!("edge {a} -> {b} references a paper outside the set")));
    }
    let local = in_citation_counts(papers, edges);
    let count = |id: CorpusId| -> f64 {
        match global_counts {
            Some(g) => g.get(&id).copied().unwrap_or(0) as f64,
            None => local.get(&id).copied().unwrap_or(0) as f64,
        }
    };
    let mut citing: BTreeMap<CorpusId, Vec<CorpusId>> = BTreeMap::new();
    for &(src, dst) in edges {
        citing.entry(dst).or_default().push(src);
    }

    grow(
        ForestKind::Inheritance,
        params,
        order,
        |selected| {
            ids.iter()
                .filter(|id| !selected.contains(id))
                .map(|&id| Candidate { id, score: count(id) })
                .collect()
        },
        |node, selected| {
            citing
                .get(&node)
                .into_iter()
                .flatten()
                .filter(|id| !selected.contains(id))
                .map(|&id| Candidate { id, score: count(id) })
                .collect()
        },
    )
}

/// Builds the Relevance forest. Roots are ranked by average chain score
/// (papers without one are ineligible); a node's candidate leaves are the
/// unselected papers it has a valid chain to, ranked by that chain value.
pub fn build_relevance_forest(
    matrix: &RelevanceMatrix,
    params: TreeParams,
    options: ForestOptions,
) -> Result<(Forest, ForestBuildTrace)> {
    let ids = matrix.paper_ids();
    let averages: Vec<Option<f64>> = (0..ids.len())
        .map(|i| matrix.average_at(i, options.chain_average))
        .collect();

    grow(
        ForestKind::Relevance,
        params,
        options.order,
        |selected| {
            ids.iter()
                .zip(&averages)
                .filter(|(id, _)| !selected.contains(id))
                .filter_map(|(&id, avg)| avg.map(|score| Candidate { id, score }))
                .collect()
        },
        |node, selected| {
            let i = matrix.index_of(node).expect("forest nodes come from the matrix");
            (0..ids.len())
                .filter(|&j| !selected.contains(&ids[j]))
                .filter_map(|j| matrix.get(i, j).map(|score| Candidate { id: ids[j], score }))
                .collect()
        },
    )
}
