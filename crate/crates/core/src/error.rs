use thiserror::Error;

/// Errors raised by the core pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input error at document {index}: {message}")]
    Input { index: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("embedding provider error at {endpoint} (status {status:?}): {message}")]
    Provider {
        endpoint: String,
        status: Option<u16>,
        message: String,
    },

    #[error("embedding protocol error: {0}")]
    Protocol(String),

    #[error("similarity undefined for a zero-information vector")]
    UndefinedSimilarity,

    #[error("relevance matrix has no valid entries")]
    EmptyMatrix,

    #[error("knowledge graph assembly failed for paper {paper_id}: {message}")]
    Assembly { paper_id: u64, message: String },

    #[error("unsupported model format version {0}")]
    ModelVersion(u32),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
