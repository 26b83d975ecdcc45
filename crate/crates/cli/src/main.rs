use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use insightkg::config::PipelineConfig;
use insightkg::pipeline::{self, Layout, KINDS};
use insightkg::server::{self, AppState};
use insightkg::stage::{InStage, Stage, StageError, StageResult};
use insightkg::KgStore;
use insightkg_core::classifier::GridSpec;
use insightkg_core::embedding::EmbeddingProviderConfig;
use insightkg_core::kg::KgOptions;
use insightkg_core::relevance::ChainAverage;
use insightkg_core::trees::{ExpansionOrder, ForestKind, ForestOptions, TreeParams};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "insightkg", version, about = "Insight knowledge graphs from a paper corpus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter the corpus by topic and build the citation graph.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        topic: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split insight text into sentences.
    Segment {
        #[arg(long)]
        out: PathBuf,
        /// JSON Lines file of split/join overrides.
        #[arg(long)]
        overrides: Option<PathBuf>,
    },
    /// Train the sentence classifier from a label file.
    Train {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON grid spec; defaults to the built-in grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// JSON embedding provider config; defaults to the local provider.
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Classify sentences and build per-paper insight bundles.
    Classify {
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the relevance matrix.
    Relate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow one forest.
    Trees {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kind: ForestKind,
        #[arg(short = 'N', long = "N", default_value_t = 3)]
        n: usize,
        #[arg(short = 'M', long = "M", default_value_t = 3)]
        m: usize,
        #[arg(short = 'T', long = "T", default_value_t = 3)]
        t: usize,
        #[arg(long, value_enum, default_value_t = OrderArg::Bfs)]
        order: OrderArg,
        #[arg(long, value_enum, default_value_t = AverageArg::Outgoing)]
        chain_average: AverageArg,
    },
    /// Write knowledge graph JSON for every forest present.
    Export {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        keywords: usize,
        #[arg(long, default_value_t = 3)]
        vocabulary: usize,
    },
    /// Serve an exported output directory over HTTP.
    Serve {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Run every stage from a TOML config.
    RunAll {
        #[arg(long)]
        config: PathBuf,
        /// Serve the result once the pipeline finishes.
        #[arg(long)]
        serve: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum OrderArg {
    Bfs,
    Dfs,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AverageArg {
    Outgoing,
    Incoming,
    Both,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("{e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}

fn read_json_arg<T: serde::de::DeserializeOwned>(path: &Path) -> StageResult<T> {
    pipeline::read_json(path).stage(Stage::Config)
}

fn run(command: Command) -> StageResult<()> {
    match command {
        Command::Ingest { corpus, topic, out } => {
            pipeline::ingest(&corpus, &topic, &Layout::new(out))?;
        }
        Command::Segment { out, overrides } => {
            pipeline::segment(&Layout::new(out), overrides.as_deref())?;
        }
        Command::Train {
            labels,
            out,
            grid,
            embedding,
        } => {
            let grid: GridSpec = grid.as_deref().map(read_json_arg).transpose()?.unwrap_or_default();
            let embedding: EmbeddingProviderConfig =
                embedding.as_deref().map(read_json_arg).transpose()?.unwrap_or_default();
            embedding.validate().stage(Stage::Config)?;
            pipeline::train_stage(&Layout::new(out), &labels, &embedding, &grid)?;
        }
        Command::Classify { out } => {
            pipeline::classify(&Layout::new(out))?;
        }
        Command::Relate { out } => {
            pipeline::relate(&Layout::new(out))?;
        }
        Command::Trees {
            out,
            kind,
            n,
            m,
            t,
            order,
            chain_average,
        } => {
            let params = TreeParams::new(n, m, t).stage(Stage::Config)?;
            let options = ForestOptions {
                order: match order {
                    OrderArg::Bfs => ExpansionOrder::Bfs,
                    OrderArg::Dfs => ExpansionOrder::Dfs,
                },
                chain_average: match chain_average {
                    AverageArg::Outgoing => ChainAverage::Outgoing,
                    AverageArg::Incoming => ChainAverage::Incoming,
                    AverageArg::Both => ChainAverage::Both,
                },
            };
            pipeline::trees(&Layout::new(out), kind, params, options)?;
        }
        Command::Export {
            out,
            keywords,
            vocabulary,
        } => {
            let layout = Layout::new(out);
            let hash = artifact_hash(&layout).stage(Stage::Export)?;
            pipeline::export(&layout, KgOptions { keywords, vocabulary }, &hash)?;
        }
        Command::Serve { out, addr } => serve(&out, &addr)?,
        Command::RunAll { config, serve: then_serve } => {
            let cfg = PipelineConfig::load(&config).stage(Stage::Config)?;
            pipeline::run_all(&cfg)?;
            if then_serve {
                serve(&cfg.out_dir, &cfg.bind)?;
            }
        }
    }
    Ok(())
}

/// Content hash of the artifacts an export depends on, used when the stages
/// are run individually rather than from a config file.
fn artifact_hash(layout: &Layout) -> anyhow::Result<String> {
    let mut hasher = Sha256::new();
    let mut inputs = vec![layout.ingest_report(), layout.model(), layout.provider(), layout.tree_options()];
    inputs.extend(KINDS.iter().map(|&k| layout.forest(k)));
    for path in inputs {
        if path.exists() {
            hasher.update(std::fs::read(&path)?);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

fn serve(out: &Path, addr: &str) -> Result<(), StageError> {
    let s = Stage::Serve;
    let store = KgStore::load(out).stage(s)?;
    let runtime = tokio::runtime::Runtime::new().stage(s)?;
    runtime.block_on(server::serve(AppState::new(store), addr)).stage(s)
}
