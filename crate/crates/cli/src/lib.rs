//! Pipeline orchestration and HTTP service for insight knowledge graphs.

pub mod config;
pub mod pipeline;
pub mod server;
pub mod stage;
pub mod store;

pub use config::PipelineConfig;
pub use stage::{Stage, StageError};
pub use store::KgStore;
