use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The input could not be parsed. `line` and `column` are 1-based; 0 means unknown.
    #[error("format error at line {line}, column {column}: {message}")]
    Format {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("need at least {needed} topics, run has {found}")]
    InsufficientTopics { needed: usize, found: usize },

    #[error("topic {topic_id} has {found} n-grams, need at least {needed}")]
    InsufficientNgrams {
        topic_id: i64,
        needed: usize,
        found: usize,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("no anchor sentence could be selected")]
    EmptyAnchors,

    #[error("run {0} is already stored")]
    Conflict(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Validation(vec![message.into()])
    }

    pub(crate) fn from_json(err: &serde_json::Error) -> Self {
        Error::Format {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
