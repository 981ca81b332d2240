//! Schema linking: entity extraction, a flat cosine index over every
//! (table, column) document, and budget-aware context assembly.

mod context;
mod entities;
mod index;

use thiserror::Error;

use crate::llm::LlmError;
use crate::schema::SchemaError;

pub use context::{assemble_context, join_path_keys, ContextOptions, SchemaContext};
pub use entities::{entity_prompt, extract_entities, fallback_entities, STOPWORDS};
pub use index::{build_index, document_text, retrieve, SchemaDocument, SchemaIndex, ScoredColumn, INDEX_FORMAT, INDEX_VERSION};

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index was built with embedder {built}, queried with {query}")]
    EmbedderMismatch { built: String, query: String },
    #[error("token budget {budget} cannot fit a single table (smallest rendering needs {needed})")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("embedding provider failed: {0}")]
    ProviderRefusal(#[from] LlmError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("index file version mismatch: found {found}")]
    VersionMismatch { found: String },
    #[error("malformed index file: {0}")]
    Malformed(String),
}
