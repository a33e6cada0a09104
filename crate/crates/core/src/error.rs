use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed XML in {file} at line {line}: {message}")]
    Xml {
        file: String,
        line: usize,
        message: String,
    },

    #[error("missing input file: {0}")]
    MissingFile(PathBuf),

    #[error("missing upstream artifact {path} (run `{stage}` first)")]
    MissingStage { stage: &'static str, path: PathBuf },

    #[error("upstream artifact {path} is out of date (re-run `{stage}`)")]
    Stale { stage: &'static str, path: PathBuf },

    #[error("malformed record in {file} line {line}: {message}")]
    Record {
        file: String,
        line: usize,
        message: String,
    },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("topic model: {0}")]
    Topic(String),

    #[error("workspace is locked by another process: {0}")]
    Locked(PathBuf),

    #[error("model format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by input data rather than by usage or internal faults.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Xml { .. }
                | Error::Record { .. }
                | Error::DegenerateLabels(_)
                | Error::MissingFile(_)
                | Error::MissingStage { .. }
                | Error::Stale { .. }
                | Error::Format(_)
                | Error::Topic(_)
        )
    }
}
