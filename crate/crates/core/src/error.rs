use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("invalid bounds at coordinate {index}: lo {lo} > hi {hi}")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },

    #[error("point outside the problem domain (violation {violation:e})")]
    InfeasibleInput { violation: f64 },

    #[error(
        "strict complementarity violated at coordinate {index}: |gradient| = {gradient} vs threshold {threshold}"
    )]
    StrictComplementarityViolated {
        index: usize,
        gradient: f64,
        threshold: f64,
    },

    #[error("iterate norm {norm:e} exceeded divergence threshold at step {step}")]
    NumericalDivergence { step: usize, norm: f64 },

    #[error("estimator has seen no iterates")]
    EmptyState,

    #[error("sequence is empty")]
    EmptySequence,

    #[error("basis columns are not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("argument {value} outside domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("direction has negative estimated variance {variance:e}")]
    DegenerateDirection { variance: f64 },

    #[error("number of replications must be at least 1")]
    InvalidReps,

    #[error("rate fit needs at least two points, got {got}")]
    InsufficientPoints { got: usize },

    #[error("rate fit needs positive values, got ({n}, {error})")]
    NonPositiveValue { n: f64, error: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {source_name} at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad user configuration rather than a
    /// failure during execution.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation(_))
    }
}
