use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("model not trained: {0}")]
    Untrained(String),

    #[error("timeline incomplete: {0}")]
    TimelineIncomplete(String),

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("missing artifact (run stage `{stage}` first): {detail}")]
    MissingArtifact { stage: String, detail: String },

    #[error("stale artifact (rerun stage `{stage}`): {detail}")]
    StaleArtifact { stage: String, detail: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Degenerate(_) => "degenerate",
            Error::NoSignal(_) => "no_signal",
            Error::Untrained(_) => "untrained",
            Error::TimelineIncomplete(_) => "timeline_incomplete",
            Error::EmptyGroup(_) => "empty_group",
            Error::Config { .. } => "config",
            Error::MissingArtifact { .. } => "missing_artifact",
            Error::StaleArtifact { .. } => "stale_artifact",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
