//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Random generation could not produce a valid instance.
    #[error("generation failed: {0}")]
    Generation(String),

    /// An agent broke a protocol rule (bad send, unknown computation, ...).
    #[error("protocol violation at agent {agent}: {detail}")]
    Protocol { agent: usize, detail: String },

    /// A numeric routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Iterates grew past the divergence guard.
    #[error("iterates diverged at iteration {iteration} (step size {step_size:e})")]
    Diverged { iteration: usize, step_size: f64 },

    /// A malformed input file.
    #[error("malformed input: {0}")]
    Format(String),

    /// An internal invariant did not hold; always a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
