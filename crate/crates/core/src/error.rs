use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("ratio undefined for the zero vector")]
    UndefinedRatio,

    #[error("unsupported region: {0}")]
    UnsupportedRegion(String),

    #[error("matrix not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("initial datum reaches x_N = {support_distance} but the truncation needs support in x_N > {delta}")]
    SupportViolation { support_distance: f64, delta: f64 },

    #[error("boundary observation vanishes (flux integral {0:e})")]
    DegenerateObservation(f64),

    #[error("field energy decreases at step {step}: expected a backward-convention field")]
    ConventionMisuse { step: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
