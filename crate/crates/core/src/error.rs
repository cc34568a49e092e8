use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive definite (max jitter {jitter:e} reached)")]
    Singular { jitter: f64 },

    #[error("log marginal likelihood is undefined for an empty training set")]
    UndefinedEvidence,

    #[error("hyperparameter optimization failed on all {restarts} restarts")]
    OptimizationFailure { restarts: usize },

    #[error("degenerate candidate: predictive variance {variance:e} below floor")]
    DegenerateCandidate { variance: f64 },

    #[error("no candidate has a finite score")]
    NoValidCandidate,

    #[error("{}:{row}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
