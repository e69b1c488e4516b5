use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown intent id `{0}`")]
    UnknownIntent(String),

    #[error("duplicate intent id `{0}`")]
    DuplicateIntent(String),

    #[error("intent space must contain at least one intent")]
    EmptyIntentSpace,

    #[error("distribution/space size mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid probability {value} at index {index}: must lie in [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, outside the accepted tolerance")]
    NotNormalized { sum: f64 },

    #[error("invalid candidate `{item_id}`: {reason}")]
    InvalidCandidate { item_id: String, reason: String },

    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
