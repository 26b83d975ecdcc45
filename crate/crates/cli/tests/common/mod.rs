#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use insightkg::config::PipelineConfig;
use insightkg::pipeline::{self, Layout};
use insightkg::server::{router, AppState};
use insightkg::KgStore;
use insightkg_core::kg::KgOptions;
use insightkg_core::trees::{ExpansionOrder, ForestKind, ForestOptions, TreeParams};
use tower::ServiceExt;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn cli_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn seven_papers(name: &str) -> PathBuf {
    repo_root().join("fixtures/seven_papers").join(name)
}

/// Inheritance-only output directory for the 7-paper fixture, using the
/// fixture's precomputed bundles.
pub fn seven_papers_out(dir: &Path) -> Layout {
    let layout = Layout::new(dir);
    pipeline::ingest(&seven_papers("corpus.jsonl"), "hotpotqa", &layout).unwrap();
    std::fs::copy(seven_papers("bundles.jsonl"), layout.bundles()).unwrap();
    let options = ForestOptions {
        order: ExpansionOrder::Bfs,
        ..Default::default()
    };
    pipeline::trees(&layout, ForestKind::Inheritance, TreeParams::new(1, 2, 3).unwrap(), options).unwrap();
    pipeline::export(&layout, KgOptions::default(), "seven-papers").unwrap();
    layout
}

/// The synthetic-corpus config with its output redirected to `out`.
pub fn synth_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&cli_fixture("synth20/run.toml")).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

pub fn app(dir: &Path) -> Router {
    router(AppState::new(KgStore::load(dir).unwrap()))
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = app
        .clone()
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

pub fn json(body: &[u8]) -> serde_json::Value {
    serde_json::from_slice(body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(body)))
}

pub fn kg_validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(repo_root().join("docs/kg.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

/// Schema errors for `instance`, empty when valid.
pub fn schema_errors(v: &jsonschema::Validator, instance: &serde_json::Value) -> Vec<String> {
    v.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}
