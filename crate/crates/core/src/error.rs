use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bracketing failed: {0}")]
    Bracket(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-positive weight {value:e} at theta = {theta}")]
    NonPositiveWeight { theta: f64, value: f64 },

    #[error("density is not normalized: integral = {0}")]
    Unnormalized(f64),

    #[error("negative density {value:e} at theta = {theta}")]
    Negativity { theta: f64, value: f64 },

    #[error("blow-up: |c_{mode}| = {magnitude:e} at t = {time}")]
    BlowUp {
        mode: usize,
        magnitude: f64,
        time: f64,
    },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("too many desynchronized paths: {excluded} of {total}")]
    Desynchronized { excluded: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
