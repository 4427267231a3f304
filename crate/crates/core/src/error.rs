use thiserror::Error;

/// Errors produced by the core numerics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{what} requires strictly positive values, found {value:e} at cell {index}")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("time step failed at t={t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("non-finite values produced at t={t}")]
    NonFinite { t: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
