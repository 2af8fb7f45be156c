use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: invalid label `{value}` (expected 0 or 1)")]
    InvalidLabel { row: usize, value: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("model format version mismatch: file has version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model kind mismatch: expected `{expected}`, found `{found}`")]
    KindMismatch { expected: String, found: String },

    #[error("feature width mismatch: model expects {expected} columns, input has {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("missing resource `{kind}`{}", .path.as_ref().map(|p| format!(" at {}", p.display())).unwrap_or_default())]
    MissingResource { kind: String, path: Option<PathBuf> },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad user input (configs, schemas, missing
    /// resources) as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::InvalidLabel { .. }
                | Error::Validation(_)
                | Error::InvalidArgument(_)
                | Error::MissingResource { .. }
        )
    }
}
