//! Crate-wide error type.

/// Errors surfaced by the library.
///
/// Parse and execution failures carry human-readable messages because they
/// are fed back to the language model verbatim as next-turn feedback.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("load error at {path}:{line}: {message}")]
    Load {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid timestamp {text:?}: {message}")]
    Timestamp { text: String, message: String },
    #[error("unknown entity: {0}")]
    EntityNotFound(String),
    #[error("ambiguous entity {surface:?} matches multiple catalog entries: {candidates:?}")]
    AmbiguousEntity {
        surface: String,
        candidates: Vec<String>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("execution error: {0}")]
    Execution(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("gateway error after {attempts} attempt(s): {message}")]
    Gateway { attempts: usize, message: String },
    #[error("replay miss for key {key}: script exhausted or no matching entry")]
    ReplayMiss { key: String },
    #[error("embedding backend error after {attempts} attempt(s): {message}")]
    EmbeddingBackend { attempts: usize, message: String },
    #[error("induction error: {0}")]
    Induction(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
