//! Pipeline stages. Each stage reads the previous stages' artifacts from the
//! output directory and writes its own. Files are written to `<name>.partial`
//! and renamed into place once complete, so an interrupted stage leaves only
//! `.partial` files behind.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use insightkg_core::classifier::{
    evaluate_predictions, extract_insight_bundles, read_label_file, train, EmbeddingClassifier, EvalReport,
    GridSpec, InsightBundle, Label, LabelCounts, SentenceClassifier, Split, SvmModel, TrainingSet,
};
use insightkg_core::corpus::{filter_by_topic, read_edges_csv, write_edges_csv, write_subset_jsonl, IngestStats, TopicSubset};
use insightkg_core::embedding::{
    EmbeddingProvider, EmbeddingProviderConfig, HashTfidfEmbedder, LocalProviderState, RemoteEmbedder,
};
use insightkg_core::kg::{assemble_kg, export_kg, KgContext, KgOptions};
use insightkg_core::relevance::{build_relevance_matrix, MatrixExport, RelevanceMatrix};
use insightkg_core::segment::{read_overrides, SegmentOverride, Segmenter, SentenceSpan};
use insightkg_core::trees::{
    build_inheritance_forest, build_relevance_forest, Forest, ForestKind, ForestOptions, TreeParams,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::stage::{InStage, Stage, StageResult};

pub const KINDS: [ForestKind; 2] = [ForestKind::Inheritance, ForestKind::Relevance];

/// Artifact paths inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Layout { dir: dir.into() }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn subset(&self) -> PathBuf {
        self.file("subset.jsonl")
    }
    pub fn edges(&self) -> PathBuf {
        self.file("edges.csv")
    }
    pub fn ingest_report(&self) -> PathBuf {
        self.file("ingest.json")
    }
    pub fn sentences(&self) -> PathBuf {
        self.file("sentences.jsonl")
    }
    pub fn provider(&self) -> PathBuf {
        self.file("provider.json")
    }
    pub fn model(&self) -> PathBuf {
        self.file("model.json")
    }
    pub fn eval(&self) -> PathBuf {
        self.file("eval.json")
    }
    pub fn bundles(&self) -> PathBuf {
        self.file("bundles.jsonl")
    }
    pub fn matrix(&self) -> PathBuf {
        self.file("matrix.json")
    }
    pub fn forest(&self, kind: ForestKind) -> PathBuf {
        self.file(&format!("forest_{}.json", kind.as_str()))
    }
    pub fn trace(&self, kind: ForestKind) -> PathBuf {
        self.file(&format!("trace_{}.jsonl", kind.as_str()))
    }
    pub fn kg(&self, kind: ForestKind) -> PathBuf {
        self.file(&format!("kg_{}.json", kind.as_str()))
    }
    pub fn tree_options(&self) -> PathBuf {
        self.file("tree_options.json")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("manifest.json")
    }
}

/// Writes `path` through a `.partial` sibling that is renamed on success.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let file = File::create(&partial).with_context(|| format!("creating {}", partial.display()))?;
    let mut w = BufWriter::new(file);
    fill(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&partial, path).with_context(|| format!("renaming {}", partial.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub topic: String,
    pub papers: usize,
    pub citation_edges: usize,
    pub dropped_citation_count: usize,
    pub stats: IngestStats,
}

/// Saved embedding provider: its config plus, for the local provider, the
/// fitted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderArtifact {
    pub config: EmbeddingProviderConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<LocalProviderState>,
}

impl ProviderArtifact {
    pub fn instantiate(&self) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
        Ok(match (&self.config, &self.state) {
            (EmbeddingProviderConfig::DeterministicHashTfidf { .. }, Some(state)) => {
                Box::new(HashTfidfEmbedder::from_state(state.clone())?)
            }
            (EmbeddingProviderConfig::DeterministicHashTfidf { .. }, None) => {
                bail!("local provider artifact has no fitted state")
            }
            (
                EmbeddingProviderConfig::RemoteService {
                    endpoint,
                    dim,
                    timeout_ms,
                    max_in_flight,
                    batch_size,
                },
                _,
            ) => Box::new(RemoteEmbedder::new(
                endpoint,
                *dim,
                Duration::from_millis(*timeout_ms),
                *max_in_flight,
                *batch_size,
            )),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub counts: LabelCounts,
    /// Sentences whose embedding was the zero vector, left out of training.
    pub skipped_empty: usize,
    pub test: Option<EvalReport>,
}

/// Snapshot settings that are not visible in the forests themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub topic: String,
    pub options: ForestOptions,
    pub kg: KgOptions,
}

pub fn ingest(corpus: &Path, topic: &str, layout: &Layout) -> StageResult<IngestReport> {
    let s = Stage::Ingest;
    let subset = filter_by_topic(open(corpus).stage(s)?, topic).stage(s)?;
    write_atomic(&layout.subset(), |w| Ok(write_subset_jsonl(&subset, w)?)).stage(s)?;
    write_atomic(&layout.edges(), |w| Ok(write_edges_csv(&subset.citation_edges, w)?)).stage(s)?;
    let report = IngestReport {
        topic: topic.to_owned(),
        papers: subset.papers.len(),
        citation_edges: subset.citation_edges.len(),
        dropped_citation_count: subset.dropped_citation_count,
        stats: subset.stats,
    };
    write_json(&layout.ingest_report(), &report).stage(s)?;
    log::info!(
        "ingest: {} papers, {} edges, {} dropped citations, {} malformed lines",
        report.papers,
        report.citation_edges,
        report.dropped_citation_count,
        report.stats.malformed_skipped
    );
    Ok(report)
}

/// Re-reads the stored subset. The subset file holds only topic matches, so
/// filtering it again reproduces the same papers and edges.
pub fn load_subset(layout: &Layout) -> anyhow::Result<TopicSubset> {
    let report: IngestReport = read_json(&layout.ingest_report())?;
    let subset = filter_by_topic(open(&layout.subset())?, &report.topic)?;
    let edges = read_edges_csv(open(&layout.edges())?)?;
    if edges != subset.citation_edges {
        bail!("{} does not match {}", layout.edges().display(), layout.subset().display());
    }
    Ok(subset)
}

pub fn segment(layout: &Layout, overrides: Option<&Path>) -> StageResult<usize> {
    let s = Stage::Segment;
    let subset = load_subset(layout).stage(s)?;
    let overrides: Vec<SegmentOverride> = match overrides {
        Some(p) => read_overrides(open(p).stage(s)?).stage(s)?,
        None => Vec::new(),
    };
    let segmenter = Segmenter::default();
    let sentences: Vec<SentenceSpan> = subset
        .papers
        .iter()
        .flat_map(|p| segmenter.segment(p.corpus_id, &p.insight_text, &overrides))
        .collect();
    write_jsonl(&layout.sentences(), &sentences).stage(s)?;
    log::info!("segment: {} sentences", sentences.len());
    Ok(sentences.len())
}

/// Fits the provider on the training sentences, grid-searches the SVM and
/// evaluates it on the test split.
pub fn train_stage(
    layout: &Layout,
    labels: &Path,
    embedding: &EmbeddingProviderConfig,
    grid: &GridSpec,
) -> StageResult<TrainReport> {
    let s = Stage::Train;
    let sentences = read_label_file(open(labels).stage(s)?).stage(s)?;
    let counts = LabelCounts::tally(&sentences);
    let (train_rows, test_rows): (Vec<_>, Vec<_>) = sentences.iter().partition(|l| l.split == Split::Train);
    let train_texts: Vec<&str> = train_rows.iter().map(|l| l.text.as_str()).collect();

    let artifact = match embedding {
        EmbeddingProviderConfig::DeterministicHashTfidf { dim, seed } => {
            let fitted = HashTfidfEmbedder::fit(*dim, *seed, train_texts.iter().copied()).stage(s)?;
            ProviderArtifact {
                config: embedding.clone(),
                state: Some(fitted.state().clone()),
            }
        }
        remote => ProviderArtifact {
            config: remote.clone(),
            state: None,
        },
    };
    let provider = artifact.instantiate().stage(s)?;

    let vectors = provider.embed_batch(&train_texts).stage(s)?;
    let mut kept_vectors = Vec::new();
    let mut kept_labels = Vec::new();
    for (v, row) in vectors.into_iter().zip(&train_rows) {
        if !v.zero {
            kept_vectors.push(v);
            kept_labels.push(row.label);
        }
    }
    let skipped_empty = train_rows.len() - kept_vectors.len();
    let set = TrainingSet::from_embeddings(&kept_vectors, &kept_labels).stage(s)?;
    let model = train(&set, grid).stage(s)?;
    if let Some(meta) = &model.metadata {
        for w in &meta.warnings {
            log::warn!("train: {w}");
        }
    }

    let test = if test_rows.is_empty() {
        None
    } else {
        let texts: Vec<&str> = test_rows.iter().map(|l| l.text.as_str()).collect();
        let predicted = EmbeddingClassifier {
            model: &model,
            provider: provider.as_ref(),
        }
        .classify_sentences(&texts)
        .stage(s)?;
        let truth: Vec<Label> = test_rows.iter().map(|l| l.label).collect();
        Some(evaluate_predictions(&truth, &predicted).stage(s)?)
    };

    write_json(&layout.provider(), &artifact).stage(s)?;
    write_atomic(&layout.model(), |w| {
        w.write_all(model.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })
    .stage(s)?;
    let report = TrainReport {
        counts,
        skipped_empty,
        test,
    };
    write_json(&layout.eval(), &report).stage(s)?;
    if let Some(t) = &report.test {
        log::info!("train: test macro-F1 {:.2}, accuracy {:.2}", t.macro_f1, t.accuracy);
    }
    Ok(report)
}

/// Installs a previously trained model and provider into the output directory.
pub fn install_frozen(layout: &Layout, model: &Path, provider: &Path) -> StageResult<()> {
    let s = Stage::Train;
    let model_text = fs::read_to_string(model)
        .with_context(|| format!("reading {}", model.display()))
        .stage(s)?;
    let parsed = SvmModel::from_json(&model_text).stage(s)?;
    let artifact: ProviderArtifact = read_json(provider).stage(s)?;
    let instance = artifact.instantiate().stage(s)?;
    if instance.tag() != parsed.provider_tag {
        return Err(anyhow::anyhow!(
            "model was trained against provider {:?} but the saved provider is {:?}",
            parsed.provider_tag,
            instance.tag()
        ))
        .stage(s);
    }
    write_atomic(&layout.model(), |w| Ok(w.write_all(model_text.as_bytes())?)).stage(s)?;
    write_json(&layout.provider(), &artifact).stage(s)?;
    Ok(())
}

fn load_provider(layout: &Layout) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
    read_json::<ProviderArtifact>(&layout.provider())?.instantiate()
}

pub fn classify(layout: &Layout) -> StageResult<Vec<InsightBundle>> {
    let s = Stage::Classify;
    let subset = load_subset(layout).stage(s)?;
    let sentences: Vec<SentenceSpan> = read_jsonl(&layout.sentences()).stage(s)?;
    let model_text = fs::read_to_string(layout.model()).stage(s)?;
    let model = SvmModel::from_json(&model_text).stage(s)?;
    let provider = load_provider(layout).stage(s)?;

    let mut by_paper: BTreeMap<u64, Vec<SentenceSpan>> = subset.ids().into_iter().map(|id| (id, Vec::new())).collect();
    for sent in sentences {
        match by_paper.get_mut(&sent.paper_id) {
            Some(list) => list.push(sent),
            None => {
                return Err(anyhow::anyhow!("sentence for paper {} outside the subset", sent.paper_id)).stage(s)
            }
        }
    }
    let papers: Vec<(u64, Vec<SentenceSpan>)> = by_paper.into_iter().collect();
    let classifier = EmbeddingClassifier {
        model: &model,
        provider: provider.as_ref(),
    };
    let bundles = extract_insight_bundles(&papers, &classifier).stage(s)?;
    write_jsonl(&layout.bundles(), &bundles).stage(s)?;
    log::info!(
        "classify: {} bundles, {} without insight sentences",
        bundles.len(),
        bundles.iter().filter(|b| b.flagged).count()
    );
    Ok(bundles)
}

pub fn relate(layout: &Layout) -> StageResult<RelevanceMatrix> {
    let s = Stage::Relate;
    let bundles: Vec<InsightBundle> = read_jsonl(&layout.bundles()).stage(s)?;
    let provider = load_provider(layout).stage(s)?;
    let matrix = build_relevance_matrix(&bundles, provider.as_ref()).stage(s)?;
    write_json(&layout.matrix(), &matrix.export()).stage(s)?;
    log::info!("relate: {} papers, {} valid chains", matrix.len(), matrix.valid_count());
    Ok(matrix)
}

pub fn load_matrix(layout: &Layout) -> anyhow::Result<RelevanceMatrix> {
    Ok(RelevanceMatrix::from_export(read_json::<MatrixExport>(&layout.matrix())?)?)
}

pub fn trees(layout: &Layout, kind: ForestKind, params: TreeParams, options: ForestOptions) -> StageResult<Forest> {
    let s = Stage::Trees;
    let (forest, trace) = match kind {
        ForestKind::Inheritance => {
            let subset = load_subset(layout).stage(s)?;
            build_inheritance_forest(&subset.ids(), &subset.citation_edges, params, None, options.order).stage(s)?
        }
        ForestKind::Relevance => {
            let matrix = load_matrix(layout).stage(s)?;
            build_relevance_forest(&matrix, params, options).stage(s)?
        }
    };
    write_json(&layout.forest(kind), &forest).stage(s)?;
    write_json(&layout.tree_options(), &options).stage(s)?;
    write_atomic(&layout.trace(kind), |w| Ok(trace.write_jsonl(w)?)).stage(s)?;
    log::info!("trees: {kind:?} forest with {} trees, {} nodes", forest.trees.len(), forest.node_count());
    Ok(forest)
}

/// Builds the KG context from the stored subset and bundles.
pub fn load_context(layout: &Layout) -> anyhow::Result<(TopicSubset, Vec<InsightBundle>, KgContext)> {
    let subset = load_subset(layout)?;
    let bundles: Vec<InsightBundle> = read_jsonl(&layout.bundles())?;
    let ctx = KgContext::new(&subset.topic_keyword, &subset.papers, &bundles);
    Ok((subset, bundles, ctx))
}

/// Writes `kg_<kind>.json` for every forest present, plus the manifest.
/// The forest options recorded by the last trees run go into the manifest so
/// the server rebuilds with the same settings.
pub fn export(layout: &Layout, kg: KgOptions, config_hash: &str) -> StageResult<usize> {
    let s = Stage::Export;
    let options: ForestOptions = if layout.tree_options().exists() {
        read_json(&layout.tree_options()).stage(s)?
    } else {
        ForestOptions::default()
    };
    let (subset, _, ctx) = load_context(layout).stage(s)?;
    let mut written = 0;
    for kind in KINDS {
        let path = layout.forest(kind);
        if !path.exists() {
            continue;
        }
        let forest: Forest = read_json(&path).stage(s)?;
        let graph = assemble_kg(&forest, &ctx, kg).stage(s)?;
        let text = export_kg(&graph).stage(s)?;
        write_atomic(&layout.kg(kind), |w| Ok(w.write_all(text.as_bytes())?)).stage(s)?;
        written += 1;
    }
    if written == 0 {
        return Err(anyhow::anyhow!("no forest files in {}", layout.dir.display())).stage(s);
    }
    let manifest = Manifest {
        config_hash: config_hash.to_owned(),
        topic: subset.topic_keyword.clone(),
        options,
        kg,
    };
    write_json(&layout.manifest(), &manifest).stage(s)?;
    Ok(written)
}

/// Every stage in order, with both forest kinds.
pub fn run_all(cfg: &PipelineConfig) -> StageResult<()> {
    let layout = Layout::new(&cfg.out_dir);
    ingest(&cfg.corpus, &cfg.topic, &layout)?;
    segment(&layout, cfg.overrides.as_deref())?;
    match (&cfg.labels, &cfg.frozen) {
        (Some(labels), _) => {
            train_stage(&layout, labels, &cfg.embedding, &cfg.classifier)?;
        }
        (None, Some(f)) => install_frozen(&layout, &f.model, &f.provider)?,
        (None, None) => {
            return Err(anyhow::anyhow!("no label file and no frozen model")).stage(Stage::Config);
        }
    }
    classify(&layout)?;
    relate(&layout)?;
    let options = cfg.trees.options();
    trees(&layout, ForestKind::Inheritance, cfg.trees.inheritance, options)?;
    trees(&layout, ForestKind::Relevance, cfg.trees.relevance, options)?;
    export(&layout, cfg.kg, &cfg.hash())?;
    Ok(())
}
