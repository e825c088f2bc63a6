use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid precision configuration: {0}")]
    InvalidConfig(String),
    #[error("horizon below 3 (got N = {0})")]
    HorizonBelowThree(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("arithmetic failure: {0}")]
    Arithmetic(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("root bracket [1/2, 1] failed for N = {0}")]
    BracketFailure(usize),
    #[error("invariant `{name}` violated: {detail}")]
    InvariantViolated { name: &'static str, detail: String },
    #[error("{method} did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invariant(name: &'static str, detail: impl Into<String>) -> Error {
    Error::InvariantViolated {
        name,
        detail: detail.into(),
    }
}
