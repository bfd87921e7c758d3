use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Malformed { file: String, line: usize, msg: String },

    #[error("duplicate report for company {company_id} filed {filing_date}")]
    DuplicateReport { company_id: String, filing_date: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("both classes are required, got only label {0}")]
    SingleClass(u8),

    #[error("no positive instances")]
    NoPositives,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context} at iteration {iteration}")]
    NonFinite { context: &'static str, iteration: usize },

    #[error("embedding table row {row}: {msg}")]
    EmbeddingTable { row: usize, msg: String },

    #[error("document keys missing from embedding table: {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("data leakage: {0}")]
    Leakage(String),

    #[error("every trial failed: {}", .0.join("; "))]
    AllTrialsFailed(Vec<String>),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage { stage, source: Box::new(e) }
    }
}
