use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("line {line}: malformed field `{field}`: {reason}")]
    MalformedField {
        line: usize,
        field: &'static str,
        reason: String,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("no clicks recorded")]
    NoClicks,

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("position {position} out of range 1..={max}")]
    Range { position: usize, max: usize },

    #[error("click pattern cannot be generated by the model: {0}")]
    Structure(String),

    #[error("previous click position {prev} must precede position {position}")]
    Ordering { prev: usize, position: usize },

    #[error("model kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    #[error("degenerate baseline perplexity {0} (must exceed 1)")]
    DegenerateBaseline(f64),

    #[error("judgment error: {0}")]
    Judgment(String),

    #[error("reports are not comparable: {0}")]
    Comparability(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Usage,
            Error::Numeric(_) | Error::DegenerateBaseline(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
