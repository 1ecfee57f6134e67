//! Exit-code policy.
//!
//! 0 converged, 2 stopped at max_iter, 3 diverged, 64 usage error
//! (bad flags or config), 1 anything else.

use diht_core::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; the message names the field.
    Usage(String),
    /// Failure while executing a valid configuration.
    Run(Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Run(Error::Diverged { .. }) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Run(err) => write!(f, "{err}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Run(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Run(Error::from(err))
    }
}
