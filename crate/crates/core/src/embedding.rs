//! Sentence embeddings behind a provider contract, and cosine similarity.
//!
//! Two providers ship: a deterministic signed-hash TF-IDF embedder fitted on a
//! document collection, and a client for a remote `POST /embed` service.
//! Every vector carries the tag of the provider that produced it; vectors
//! from different providers are never compared.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::{content_tokens, fnv1a64, DocumentFrequency};

pub const MIN_DIM: usize = 8;
pub const DEFAULT_DIM: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_tag: String,
    /// Set for texts without content; such vectors are all zero and have no
    /// defined similarity.
    pub zero: bool,
}

impl EmbeddingVector {
    /// L2-normalizes `values`. An all-zero input yields a flagged zero vector.
    pub fn normalized(mut values: Vec<f64>, provider_tag: impl Into<String>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let zero = norm == 0.0 || !norm.is_finite();
        if zero {
            values.iter_mut().for_each(|v| *v = 0.0);
        } else {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector {
            values,
            provider_tag: provider_tag.into(),
            zero,
        }
    }

    pub fn zero(dim: usize, provider_tag: impl Into<String>) -> Self {
        EmbeddingVector {
            values: vec![0.0; dim],
            provider_tag: provider_tag.into(),
            zero: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dot product of two unit vectors from the same provider, clamped to [-1, 1].
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.provider_tag != b.provider_tag {
        return Err(Error::invalid(format!(
            "cannot compare vectors from providers {:?} and {:?}",
            a.provider_tag, b.provider_tag
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.zero || b.zero {
        return Err(Error::UndefinedSimilarity);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbeddingProviderConfig {
    DeterministicHashTfidf {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    RemoteService {
        /// Base URL; requests go to `{endpoint}/embed`.
        endpoint: String,
        dim: usize,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_in_flight() -> usize {
    4
}
fn default_batch() -> usize {
    64
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        EmbeddingProviderConfig::DeterministicHashTfidf {
            dim: DEFAULT_DIM,
            seed: 0,
        }
    }
}

impl EmbeddingProviderConfig {
    pub fn dim(&self) -> usize {
        match self {
            Self::DeterministicHashTfidf { dim, .. } | Self::RemoteService { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() < MIN_DIM {
            return Err(Error::invalid(format!(
                "embedding dim must be >= {MIN_DIM}, got {}",
                self.dim()
            )));
        }
        if let Self::RemoteService {
            max_in_flight,
            batch_size,
            ..
        } = self
        {
            if *max_in_flight == 0 || *batch_size == 0 {
                return Err(Error::invalid("max_in_flight and batch_size must be >= 1"));
            }
        }
        Ok(())
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn tag(&self) -> &str;

    fn dim(&self) -> usize;

    /// Embeds every text, in order. Blank texts map to flagged zero vectors.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self
            .embed_batch(&[text])?
            .pop()
            .expect("one vector per text"))
    }
}

/// Serializable state of a fitted local provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalProviderState {
    pub dim: usize,
    pub seed: u64,
    pub df: DocumentFrequency,
}

/// Signed feature hashing of TF-IDF weights.
#[derive(Debug, Clone)]
pub struct HashTfidfEmbedder {
    state: LocalProviderState,
    tag: String,
}

impl HashTfidfEmbedder {
    /// Builds the document-frequency table from `docs` (one pass, order
    /// independent) and returns the fitted embedder.
    pub fn fit<'a, I>(dim: usize, seed: u64, docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let df = DocumentFrequency::from_token_docs(docs.into_iter().map(content_tokens));
        Self::from_state(LocalProviderState { dim, seed, df })
    }

    pub fn from_state(state: LocalProviderState) -> Result<Self> {
        if state.dim < MIN_DIM {
            return Err(Error::invalid(format!(
                "embedding dim must be >= {MIN_DIM}, got {}",
                state.dim
            )));
        }
        let digest = Sha256::digest(serde_json::to_vec(&state)?);
        let tag = format!(
            "hash-tfidf/d{}/s{}/{}",
            state.dim,
            state.seed,
            &hex::encode(digest)[..16]
        );
        Ok(HashTfidfEmbedder { state, tag })
    }

    pub fn state(&self) -> &LocalProviderState {
        &self.state
    }

    /// Un-normalized hashed TF-IDF accumulator for `text`.
    pub fn raw_features(&self, text: &str) -> Vec<f64> {
        let dim = self.state.dim;
        let mut acc = vec![0.0; dim];
        let weights = self.state.df.tfidf(&content_tokens(text));
        for (term, w) in weights {
            let h = fnv1a64(self.state.seed, term.as_bytes());
            let bucket = (h % dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            acc[bucket] += sign * w;
        }
        acc
    }
}

impl EmbeddingProvider for HashTfidfEmbedder {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn dim(&self) -> usize {
        self.state.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts
            .iter()
            .map(|t| EmbeddingVector::normalized(self.raw_features(t), self.tag.clone()))
            .collect())
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// Client for an external embedding service speaking the `/embed` protocol.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    dim: usize,
    timeout: Duration,
    max_in_flight: usize,
    batch_size: usize,
    tag: String,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: &str,
        dim: usize,
        timeout: Duration,
        max_in_flight: usize,
        batch_size: usize,
    ) -> Self {
        let base = endpoint.trim_end_matches('/');
        RemoteEmbedder {
            url: format!("{base}/embed"),
            dim,
            timeout,
            max_in_flight: max_in_flight.max(1),
            batch_size: batch_size.max(1),
            tag: format!("remote/{base}/d{dim}"),
        }
    }

    fn post(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let provider_err = |status: Option<u16>, message: String| Error::Provider {
            endpoint: self.url.clone(),
            status,
            message,
        };
        let mut resp = agent
            .post(&self.url)
            .send_json(EmbedRequest { texts })
            .map_err(|e| provider_err(None, e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(provider_err(Some(status), body));
        }
        let parsed: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Protocol(format!("unreadable response: {e}")))?;
        if parsed.dim != self.dim {
            return Err(Error::Protocol(format!(
                "expected dim {}, service reported {}",
                self.dim, parsed.dim
            )));
        }
        if parsed.vectors.len() != texts.len() {
            return Err(Error::Protocol(format!(
                "sent {} texts, received {} vectors",
                texts.len(),
                parsed.vectors.len()
            )));
        }
        for v in &parsed.vectors {
            if v.len() != self.dim || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Protocol(format!(
                    "vector of length {} (expected {}) or with non-finite components",
                    v.len(),
                    self.dim
                )));
            }
        }
        Ok(parsed.vectors)
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let mut out: Vec<EmbeddingVector> = texts
            .iter()
            .map(|_| EmbeddingVector::zero(self.dim, self.tag.clone()))
            .collect();
        let pending: Vec<usize> = (0..texts.len())
            .filter(|&i| !texts[i].trim().is_empty())
            .collect();
        let chunks: Vec<&[usize]> = pending.chunks(self.batch_size).collect();
        for wave in chunks.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| {
                        let batch: Vec<&str> = chunk.iter().map(|&i| texts[i]).collect();
                        scope.spawn(move || self.post(&batch))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding request thread panicked"))
                    .collect()
            });
            for (chunk, result) in wave.iter().zip(results) {
                for (&i, values) in chunk.iter().zip(result?) {
                    out[i] = EmbeddingVector::normalized(values, self.tag.clone());
                }
            }
        }
        Ok(out)
    }
}

/// Instantiates the configured provider. The local provider is fitted on
/// `fit_docs`; the remote provider ignores them.
pub fn build_provider<'a, I>(
    cfg: &EmbeddingProviderConfig,
    fit_docs: I,
) -> Result<Box<dyn EmbeddingProvider>>
where
    I: IntoIterator<Item = &'a str>,
{
    cfg.validate()?;
    Ok(match cfg {
        EmbeddingProviderConfig::DeterministicHashTfidf { dim, seed } => {
            Box::new(HashTfidfEmbedder::fit(*dim, *seed, fit_docs)?)
        }
        EmbeddingProviderConfig::RemoteService {
            endpoint,
            dim,
            timeout_ms,
            max_in_flight,
            batch_size,
        } => Box::new(RemoteEmbedder::new(
            endpoint,
            *dim,
            Duration::from_millis(*timeout_ms),
            *max_in_flight,
            *batch_size,
        )),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    const DOCS: [&str; 4] = [
        "Multi-hop question answering over Wikipedia paragraphs.",
        "We propose a retrieval model for open-domain questions.",
        "Reading comprehension benchmarks reveal annotation artifacts.",
        "Future work should study iterative retrieval for multi-hop reasoning.",
    ];

    fn local() -> HashTfidfEmbedder {
        HashTfidfEmbedder::fit(1024, 0, DOCS).unwrap()
    }

    fn fixed(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalized(values.to_vec(), "fixture")
    }

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let e = local();
        let a = e.embed(DOCS[0]).unwrap();
        let b = e.embed(DOCS[0]).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert!(a.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn disjoint_texts_are_nearly_orthogonal() {
        let a = "graph neural networks propagate node features";
        let b = "bidirectional transformers pretrain language representations";
        let ta: BTreeSet<_> = content_tokens(a).into_iter().collect();
        let tb: BTreeSet<_> = content_tokens(b).into_iter().collect();
        assert!(ta.is_disjoint(&tb));
        let e = local();
        let c = cosine(&e.embed(a).unwrap(), &e.embed(b).unwrap()).unwrap();
        assert!(c.abs() <= 0.05, "cosine {c}");
    }

    #[test]
    fn empty_and_stopword_only_texts_are_flagged_zero() {
        let e = local();
        for t in ["", "   ", "the and of"] {
            let v = e.embed(t).unwrap();
            assert!(v.zero);
            assert!(v.values.iter().all(|x| *x == 0.0));
        }
        let z = e.embed("").unwrap();
        let v = e.embed(DOCS[1]).unwrap();
        assert!(matches!(cosine(&z, &v), Err(Error::UndefinedSimilarity)));
    }

    #[test]
    fn cosine_identity_antipodal_and_hand_fixture() {
        let v = fixed(&[0.3, -0.2, 0.9]);
        let neg = fixed(&[-0.3, 0.2, -0.9]);
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-12);
        let a = fixed(&[1.0, 0.0, 0.0]);
        let b = fixed(&[0.6, 0.8, 0.0]);
        assert!((cosine(&a, &b).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cosine_rejects_mixed_providers() {
        let a = fixed(&[1.0, 0.0]);
        let b = EmbeddingVector::normalized(vec![1.0, 0.0], "other");
        assert!(matches!(cosine(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn df_table_is_corpus_order_independent() {
        let mut rev = DOCS;
        rev.reverse();
        let a = HashTfidfEmbedder::fit(256, 3, DOCS).unwrap();
        let b = HashTfidfEmbedder::fit(256, 3, rev).unwrap();
        assert_eq!(a.tag(), b.tag());
        for d in DOCS {
            assert_eq!(a.embed(d).unwrap(), b.embed(d).unwrap());
        }
    }

    #[test]
    fn small_dim_is_rejected() {
        assert!(HashTfidfEmbedder::fit(4, 0, DOCS).is_err());
        let cfg = EmbeddingProviderConfig::DeterministicHashTfidf { dim: 7, seed: 0 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg: EmbeddingProviderConfig = serde_json::from_str(
            r#"{"kind": "remote-service", "endpoint": "http://localhost:9", "dim": 768}"#,
        )
        .unwrap();
        assert_eq!(cfg.dim(), 768);
        assert!(matches!(cfg, EmbeddingProviderConfig::RemoteService { timeout_ms: 30_000, .. }));
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric(
            a in proptest::collection::vec(-1.0f64..1.0, 16),
            b in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            let (va, vb) = (fixed(&a), fixed(&b));
            prop_assume!(!va.zero && !vb.zero);
            let ab = cosine(&va, &vb).unwrap();
            prop_assert_eq!(ab, cosine(&vb, &va).unwrap());
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn normalization_is_idempotent(a in proptest::collection::vec(-10.0f64..10.0, 1..32)) {
            let once = fixed(&a);
            let twice = EmbeddingVector::normalized(once.values.clone(), "fixture");
            prop_assert_eq!(once.zero, twice.zero);
            for (x, y) in once.values.iter().zip(&twice.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
