use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs of an operation was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shifted solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The estimator failed to bound the error it is supposed to bound.
    #[error("reliability violation: error {error:e} exceeds estimator {estimator:e}")]
    ReliabilityViolation { error: f64, estimator: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("plot rendering failed: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
