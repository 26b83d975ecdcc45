//! In-memory snapshot of one pipeline output directory, as served over HTTP.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use anyhow::{bail, Context};
use insightkg_core::classifier::InsightBundle;
use insightkg_core::kg::{assemble_kg, export_kg, KgContext, KgOptions};
use insightkg_core::relevance::RelevanceMatrix;
use insightkg_core::trees::{
    build_inheritance_forest, build_relevance_forest, Forest, ForestKind, ForestOptions, TreeParams,
};
use serde::Serialize;

use crate::pipeline::{load_context, load_matrix, read_json, IngestReport, Layout, Manifest, KINDS};

/// Graphs built for non-default parameters are cached up to this many entries.
const REBUILD_CACHE: usize = 64;

struct Snapshot {
    params: TreeParams,
    forest: Forest,
    body: Arc<String>,
}

pub struct KgStore {
    manifest: Manifest,
    report: IngestReport,
    ctx: KgContext,
    ids: Vec<u64>,
    edges: BTreeSet<(u64, u64)>,
    cited_by: BTreeMap<u64, usize>,
    matrix: Option<RelevanceMatrix>,
    snapshots: BTreeMap<ForestKind, Snapshot>,
    cache: Mutex<HashMap<(ForestKind, TreeParams), Arc<String>>>,
    pub loaded_at: SystemTime,
}

#[derive(Debug, Serialize)]
pub struct PaperView {
    pub id: u64,
    pub title: String,
    pub keywords: Vec<String>,
    pub resolved_text: String,
    pub finding_text: String,
    pub cited_by_count: usize,
}

#[derive(Debug, Serialize)]
pub struct MatrixRow {
    pub id: u64,
    pub average: Option<f64>,
    pub scores: Vec<RowEntry>,
}

#[derive(Debug, Serialize)]
pub struct RowEntry {
    pub id: u64,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub config_hash: String,
    pub topic: String,
    pub papers: usize,
    pub citation_edges: usize,
    pub dropped_citation_count: usize,
    pub valid_chains: Option<usize>,
    pub forests: BTreeMap<ForestKind, ForestMeta>,
    pub options: ForestOptions,
    pub loaded_at: u64,
}

#[derive(Debug, Serialize)]
pub struct ForestMeta {
    pub params: TreeParams,
    pub trees: usize,
    pub nodes: usize,
    pub max_depth: usize,
}

/// Raised when a rebuild is requested for data that is not loaded.
#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{0} is not loaded")]
    MissingKind(&'static str),
    #[error(transparent)]
    Build(#[from] insightkg_core::Error),
}

impl KgStore {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let layout = Layout::new(dir);
        let manifest: Manifest = read_json(&layout.manifest()).context("output directory has no export")?;
        let report: IngestReport = read_json(&layout.ingest_report())?;
        let (subset, bundles, ctx) = load_context(&layout)?;
        let ids = subset.ids();
        let mut cited_by: BTreeMap<u64, usize> = ids.iter().map(|&id| (id, 0)).collect();
        for &(_, cited) in &subset.citation_edges {
            *cited_by.entry(cited).or_default() += 1;
        }
        check_bundles(&ids, &bundles)?;
        let matrix = if layout.matrix().exists() {
            Some(load_matrix(&layout)?)
        } else {
            None
        };

        let mut snapshots = BTreeMap::new();
        for kind in KINDS {
            let kg_path = layout.kg(kind);
            if !kg_path.exists() {
                continue;
            }
            let forest: Forest = read_json(&layout.forest(kind))?;
            let body = std::fs::read_to_string(&kg_path).with_context(|| format!("reading {}", kg_path.display()))?;
            snapshots.insert(
                kind,
                Snapshot {
                    params: forest.params,
                    forest,
                    body: Arc::new(body),
                },
            );
        }
        if snapshots.is_empty() {
            bail!("no knowledge graphs in {}", dir.display());
        }
        Ok(KgStore {
            manifest,
            report,
            ctx,
            ids,
            edges: subset.citation_edges,
            cited_by,
            matrix,
            snapshots,
            cache: Mutex::new(HashMap::new()),
            loaded_at: SystemTime::now(),
        })
    }

    pub fn default_params(&self, kind: ForestKind) -> Option<TreeParams> {
        self.snapshots.get(&kind).map(|s| s.params)
    }

    /// Serialized graph for `kind`. The stored export is returned for the
    /// snapshot's own parameters; other parameters are rebuilt.
    pub fn graph(&self, kind: ForestKind, params: TreeParams) -> Result<Arc<String>, StoreError> {
        let snap = self.snapshots.get(&kind).ok_or(StoreError::MissingKind(kind.as_str()))?;
        if snap.params == params {
            return Ok(snap.body.clone());
        }
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&(kind, params)) {
            return Ok(hit.clone());
        }
        let forest = self.build_forest(kind, params)?;
        let body = Arc::new(export_kg(&assemble_kg(&forest, &self.ctx, self.kg_options())?)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= REBUILD_CACHE {
            cache.clear();
        }
        cache.insert((kind, params), body.clone());
        Ok(body)
    }

    fn build_forest(&self, kind: ForestKind, params: TreeParams) -> Result<Forest, StoreError> {
        let options = self.manifest.options;
        let (forest, _) = match kind {
            ForestKind::Inheritance => build_inheritance_forest(&self.ids, &self.edges, params, None, options.order)?,
            ForestKind::Relevance => {
                let matrix = self.matrix.as_ref().ok_or(StoreError::MissingKind("relevance matrix"))?;
                build_relevance_forest(matrix, params, options)?
            }
        };
        Ok(forest)
    }

    fn kg_options(&self) -> KgOptions {
        self.manifest.kg
    }

    pub fn paper(&self, id: u64) -> Option<PaperView> {
        let paper = self.ctx.paper(id)?;
        let bundle = self.ctx.bundle(id);
        Some(PaperView {
            id,
            title: paper.title.clone(),
            keywords: self.ctx.index().keywords(paper, self.kg_options().keywords),
            resolved_text: bundle.map(|b| b.resolved_text.clone()).unwrap_or_default(),
            finding_text: bundle.map(|b| b.finding_text.clone()).unwrap_or_default(),
            cited_by_count: self.cited_by.get(&id).copied().unwrap_or(0),
        })
    }

    /// Valid scores from `id` to every other paper, ascending by id.
    pub fn matrix_row(&self, id: u64) -> Option<MatrixRow> {
        let matrix = self.matrix.as_ref()?;
        let row = matrix.row(id).ok()?;
        let average = matrix
            .average_chain_score(id, self.manifest.options.chain_average)
            .ok()
            .flatten();
        let scores = row
            .into_iter()
            .map(|(id, score)| RowEntry { id, score })
            .collect();
        Some(MatrixRow { id, average, scores })
    }

    pub fn meta(&self) -> Meta {
        Meta {
            config_hash: self.manifest.config_hash.clone(),
            topic: self.manifest.topic.clone(),
            papers: self.report.papers,
            citation_edges: self.report.citation_edges,
            dropped_citation_count: self.report.dropped_citation_count,
            valid_chains: self.matrix.as_ref().map(|m| m.valid_count()),
            forests: self
                .snapshots
                .iter()
                .map(|(&kind, s)| {
                    (
                        kind,
                        ForestMeta {
                            params: s.params,
                            trees: s.forest.trees.len(),
                            nodes: s.forest.node_count(),
                            max_depth: s.forest.max_depth(),
                        },
                    )
                })
                .collect(),
            options: self.manifest.options,
            loaded_at: self
                .loaded_at
                .duration_since(SystemTime::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

fn check_bundles(ids: &[u64], bundles: &[InsightBundle]) -> anyhow::Result<()> {
    let have: BTreeSet<u64> = bundles.iter().map(|b| b.paper_id).collect();
    if let Some(missing) = ids.iter().find(|id| !have.contains(id)) {
        bail!("paper {missing} has no insight bundle");
    }
    Ok(())
}
