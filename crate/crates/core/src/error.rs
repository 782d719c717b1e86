use thiserror::Error;

/// Unified error type for the engine.
#[derive(Debug, Error)]
pub enum GroveError {
    /// Dataset construction or validation failed.
    #[error("invalid data: {0}")]
    Data(String),

    /// Growth or sampling configuration rejected.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Prediction input does not match the trained forest.
    #[error("schema mismatch: {0}")]
    Schema(String),

    /// Stored forest rejected (bad magic, version, or checksum).
    #[error("invalid forest file: {0}")]
    ForestFile(String),

    /// No out-of-bag observations were available for evaluation.
    #[error("no out-of-bag data: {0}")]
    NoOob(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GroveError>;
