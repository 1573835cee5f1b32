use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unknown label {label:?} (line {line})")]
    UnknownLabel { label: String, line: usize },

    #[error("empty corpus and no label space supplied")]
    NoLabels,

    #[error("invalid label space: {0}")]
    LabelSpace(String),

    #[error("need {required} sessions but corpus has only {available}")]
    InsufficientSessions { required: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "label pool exhausted: {m} target labels x K={k} needs {needed} source labels, only {available} have samples"
    )]
    PoolExhausted {
        m: usize,
        k: usize,
        needed: usize,
        available: usize,
    },

    #[error("task count {count} exceeds enumeration cap {cap}; use a streaming sampler")]
    EnumerationCap { count: String, cap: u64 },

    #[error("source label {0:?} has no samples")]
    ZeroCount(String),

    #[error("source label {0:?} is not in any label subset")]
    Unclustered(String),

    #[error("tag map: {0}")]
    TagMap(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Run {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the error stems from the input data rather than from how
    /// the program was invoked.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Config(_) => false,
            Error::Run { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}
