use thiserror::Error;

use crate::fbm::Regime;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SiltError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires {required} regime, got {actual:?}")]
    Regime { required: String, actual: Regime },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value out of supported range: {0}")]
    Range(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("grid too large for backend: n = {steps} exceeds cap {cap}")]
    SizeCap { steps: usize, cap: usize },

    #[error("circulant embedding failed: minimum eigenvalue {min_eigenvalue:e} below tolerance")]
    Embedding { min_eigenvalue: f64 },

    #[error("time {time} is not on the path grid (dt = {dt}, horizon = {horizon})")]
    OffGrid { time: f64, dt: f64, horizon: f64 },
}

pub type Result<T> = std::result::Result<T, SiltError>;

pub(crate) fn invalid(msg: impl Into<String>) -> SiltError {
    SiltError::InvalidParameter(msg.into())
}
