use thiserror::Error;

/// Errors raised by space construction, searches and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("basis construction failed: {0}")]
    Construction(String),

    #[error("search budget exceeded: {needed} norm evaluations requested, limit is {limit}")]
    Budget { needed: u64, limit: u64 },

    #[error("corpus size {size} exceeds the cap of {cap}")]
    CorpusCap { size: usize, cap: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("report schema mismatch: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
