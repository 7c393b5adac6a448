use thiserror::Error;

/// Errors raised by state construction, criteria evaluation and the CLI surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("representation error: {0}")]
    Representation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("mean spin is undefined (|<J>| = {0:e})")]
    UndefinedMeanSpin(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no admissible frame found: {0}")]
    NoAdmissibleFrame(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
