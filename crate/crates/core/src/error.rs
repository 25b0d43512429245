use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("not converged after {iterations} iterations: {detail}")]
    NotConverged { iterations: usize, detail: String },

    #[error("degenerate seed: sup|u| = {sup:e} collapsed below 1e-8")]
    DegenerateSeed { sup: f64 },

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("invalid spike configuration: {0}")]
    InvalidConfig(String),

    #[error("ill-conditioned projection system (condition number {cond:e})")]
    IllConditioned { cond: f64 },

    #[error("correction diverged: {0}")]
    Diverged(String),

    #[error("degree undefined: {0}")]
    DegreeUndefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
