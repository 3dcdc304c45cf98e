//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical routine failed (factorization breakdown, non-convergence).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Configuration text could not be parsed or validated.
    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    /// An internal consistency requirement failed; usually actionable.
    #[error("internal error: {0}")]
    Internal(String),

    /// The SDP step failed in a way that aborts the outer iteration.
    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Annotate an error with the k-point index it occurred at.
    pub fn at_k(self, k_index: usize) -> Self {
        match self {
            Error::Numerical(msg) => Error::Numerical(format!("at k-point {k_index}: {msg}")),
            Error::InvalidArgument(msg) => {
                Error::InvalidArgument(format!("at k-point {k_index}: {msg}"))
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
