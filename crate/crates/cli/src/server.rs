//! HTTP API over a loaded [`KgStore`].
//!
//! - `GET /kg/{kind}?N=&M=&T=`: knowledge graph JSON; missing parameters
//!   default to the snapshot's.
//! - `GET /paper/{id}`: paper details.
//! - `GET /matrix/row/{id}`: valid relevance scores from one paper.
//! - `GET /meta`: snapshot summary.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use insightkg_core::trees::{ForestKind, TreeParams};
use serde_json::json;

use crate::store::{KgStore, StoreError};

/// Shared handle to the current snapshot. Readers clone the inner `Arc`, so a
/// replacement never blocks in-flight requests.
#[derive(Clone)]
pub struct AppState {
    current: Arc<RwLock<Arc<KgStore>>>,
}

impl AppState {
    pub fn new(store: KgStore) -> Self {
        AppState {
            current: Arc::new(RwLock::new(Arc::new(store))),
        }
    }

    pub fn snapshot(&self) -> Arc<KgStore> {
        self.current.read().expect("state lock").clone()
    }

    pub fn replace(&self, store: KgStore) {
        *self.current.write().expect("state lock") = Arc::new(store);
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/kg/{kind}", get(kg))
        .route("/paper/{id}", get(paper))
        .route("/matrix/row/{id}", get(matrix_row))
        .route("/meta", get(meta))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest { message: String, field: &'static str },
    NotFound(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest { message, field } => {
                (StatusCode::BAD_REQUEST, json!({ "error": message, "field": field }))
            }
            ApiError::NotFound(message) => (StatusCode::NOT_FOUND, json!({ "error": message })),
            ApiError::Internal(message) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message })),
        };
        (status, Json(body)).into_response()
    }
}

fn bad(field: &'static str, message: impl Into<String>) -> ApiError {
    ApiError::BadRequest {
        message: message.into(),
        field,
    }
}

fn parse_param(query: &HashMap<String, String>, field: &'static str, default: usize) -> Result<usize, ApiError> {
    let Some(raw) = query.get(field) else {
        return Ok(default);
    };
    match raw.trim().parse::<usize>() {
        Ok(0) => Err(bad(field, format!("{field} must be at least 1"))),
        Ok(v) => Ok(v),
        Err(_) => Err(bad(field, format!("{field} must be a positive integer, got {raw:?}"))),
    }
}

fn parse_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| bad("id", format!("paper id must be an unsigned integer, got {raw:?}")))
}

async fn kg(
    State(state): State<AppState>,
    Path(kind): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let kind: ForestKind = kind.parse().map_err(|_| bad("kind", format!("unknown forest kind {kind:?}")))?;
    let store = state.snapshot();
    let defaults = store
        .default_params(kind)
        .ok_or_else(|| ApiError::NotFound(format!("no {} graph loaded", kind.as_str())))?;
    let params = TreeParams {
        n_roots: parse_param(&query, "N", defaults.n_roots)?,
        m_leaves: parse_param(&query, "M", defaults.m_leaves)?,
        t_depth: parse_param(&query, "T", defaults.t_depth)?,
    };
    let body = if params == defaults {
        store.graph(kind, params)
    } else {
        tokio::task::spawn_blocking(move || store.graph(kind, params))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
    };
    match body {
        Ok(body) => Ok(([(header::CONTENT_TYPE, "application/json")], body.as_str().to_owned()).into_response()),
        Err(StoreError::MissingKind(what)) => Err(ApiError::NotFound(format!("no {what} loaded"))),
        Err(e) => Err(ApiError::Internal(e.to_string())),
    }
}

async fn paper(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    state
        .snapshot()
        .paper(id)
        .map(|p| Json(p).into_response())
        .ok_or_else(|| ApiError::NotFound(format!("paper {id} is not in the subset")))
}

async fn matrix_row(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    state
        .snapshot()
        .matrix_row(id)
        .map(|r| Json(r).into_response())
        .ok_or_else(|| ApiError::NotFound(format!("paper {id} has no matrix row")))
}

async fn meta(State(state): State<AppState>) -> Response {
    Json(state.snapshot().meta()).into_response()
}
