use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file or line.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    /// Label or target annotation that violates the BIO / span rules.
    #[error("annotation error at token {index}: {message}")]
    Annotation { index: usize, message: String },

    /// Parse records that do not line up with the instances they annotate.
    #[error("join error for sentence {sentence_id}: {message}")]
    Join { sentence_id: String, message: String },

    /// Dependency heads that do not form a single rooted tree.
    #[error("parse error for sentence {sentence_id}: {message}")]
    Parse { sentence_id: String, message: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("load error in {path}, line {line}: {message}")]
    Load {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("feature error: {0}")]
    Feature(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn annotation(index: usize, message: impl Into<String>) -> Self {
        Error::Annotation {
            index,
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's configuration or arguments
    /// rather than by a failure while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Precondition(_) | Error::Io { .. }
        )
    }
}
