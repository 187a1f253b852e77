use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants split into two families: problems with what the caller handed
/// us (malformed documents, bad hyperparameters, unmet preconditions) and
/// numerical failures encountered while computing. [`Error::is_numerical`]
/// tells them apart, which the command-line tool maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pattern: {0}")]
    Pattern(String),

    #[error("invalid prior: {0}")]
    Prior(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("zero variance in dimension {0}")]
    ZeroVariance(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures that arise during computation rather than from
    /// invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NotPositiveDefinite(_)
                | Error::Numerical(_)
                | Error::ZeroVariance(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
