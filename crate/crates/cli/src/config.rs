//! TOML pipeline configuration. Relative paths resolve against the directory
//! holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use insightkg_core::classifier::GridSpec;
use insightkg_core::embedding::EmbeddingProviderConfig;
use insightkg_core::kg::KgOptions;
use insightkg_core::relevance::ChainAverage;
use insightkg_core::trees::{ExpansionOrder, ForestOptions, TreeParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub topic: String,
    pub out_dir: PathBuf,
    /// Label file; when present the classifier is trained from it.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Previously trained model, used when `labels` is absent.
    #[serde(default)]
    pub frozen: Option<FrozenModel>,
    /// Sentence split/join overrides (JSON Lines).
    #[serde(default)]
    pub overrides: Option<PathBuf>,
    #[serde(default)]
    pub embedding: EmbeddingProviderConfig,
    #[serde(default)]
    pub classifier: GridSpec,
    #[serde(default)]
    pub trees: TreesConfig,
    #[serde(default)]
    pub kg: KgOptions,
    #[serde(default = "default_bind")]
    pub bind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenModel {
    pub model: PathBuf,
    /// Saved provider (`provider.json`); required for the local provider.
    pub provider: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreesConfig {
    #[serde(default = "default_params")]
    pub inheritance: TreeParams,
    #[serde(default = "default_params")]
    pub relevance: TreeParams,
    #[serde(default)]
    pub order: ExpansionOrder,
    #[serde(default)]
    pub chain_average: ChainAverage,
}

impl TreesConfig {
    pub fn options(&self) -> ForestOptions {
        ForestOptions {
            order: self.order,
            chain_average: self.chain_average,
        }
    }
}

impl Default for TreesConfig {
    fn default() -> Self {
        TreesConfig {
            inheritance: default_params(),
            relevance: default_params(),
            order: ExpansionOrder::default(),
            chain_average: ChainAverage::default(),
        }
    }
}

fn default_params() -> TreeParams {
    TreeParams {
        n_roots: 3,
        m_leaves: 3,
        t_depth: 3,
    }
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl PipelineConfig {
    /// Reads, resolves and validates a config file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: PipelineConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.out_dir);
        if let Some(p) = self.labels.as_mut() {
            fix(p);
        }
        if let Some(p) = self.overrides.as_mut() {
            fix(p);
        }
        if let Some(f) = self.frozen.as_mut() {
            fix(&mut f.model);
            fix(&mut f.provider);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.topic.trim().is_empty() {
            bail!("topic must be non-empty");
        }
        let must_exist = |what: &str, p: &Path| -> anyhow::Result<()> {
            if !p.exists() {
                bail!("{what} {} does not exist", p.display());
            }
            Ok(())
        };
        must_exist("corpus", &self.corpus)?;
        if let Some(p) = &self.labels {
            must_exist("label file", p)?;
        }
        if let Some(p) = &self.overrides {
            must_exist("override file", p)?;
        }
        match (&self.labels, &self.frozen) {
            (None, None) => bail!("either `labels` or `frozen` must be set"),
            (None, Some(f)) => {
                must_exist("frozen model", &f.model)?;
                must_exist("frozen provider", &f.provider)?;
            }
            _ => {}
        }
        self.embedding.validate()?;
        self.trees.inheritance.validate().context("trees.inheritance")?;
        self.trees.relevance.validate().context("trees.relevance")?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
