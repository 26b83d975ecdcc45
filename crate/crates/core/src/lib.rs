pub mod classifier;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod kg;
pub mod relevance;
pub mod segment;
pub mod text;
pub mod trees;

pub use error::{Error, Result};
