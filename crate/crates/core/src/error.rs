use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular (|det| = {det:e}, floor = {floor:e})")]
    SingularMatrix { det: f64, floor: f64 },

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter {name} = {value} outside domain: {reason}")]
    Domain {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not supported: {0}")]
    NotSupported(String),

    #[error("solver did not converge after {iterations} iterations (|score|_inf = {score_norm:e})")]
    NotConverged { iterations: usize, score_norm: f64 },

    #[error("no root of the estimating equation inside the parameter domain")]
    NoRootInDomain,

    #[error("{failures} of {replicates} replicates failed to converge (budget {budget})")]
    TooManyFailures {
        failures: usize,
        replicates: usize,
        budget: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &str, value: f64, reason: impl Into<String>) -> Self {
        Error::Domain {
            name: name.to_string(),
            value,
            reason: reason.into(),
        }
    }
}
