use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid projector: {0}")]
    InvalidProjector(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid coarse-graining: {0}")]
    InvalidGraining(String),

    #[error("degeneracy violation: {0}")]
    DegeneracyViolation(String),

    #[error("incomplete measure: no value for {0}")]
    IncompleteMeasure(String),

    #[error("ray geometry: {0}")]
    Geometry(String),

    #[error("resolution exhausted: {required} sub-cells required, grid supports {available}")]
    Resolution { required: u64, available: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} approximants (best error {best_error:e})")]
    Convergence { iterations: usize, best_error: f64 },

    #[error("inconsistent constraint system; conflicting constraints {constraints:?}")]
    Inconsistent { constraints: Vec<usize> },

    #[error("integration failure at step {step} (t = {time}): {reason}")]
    Integration { step: usize, time: f64, reason: String },

    #[error("relabeling error: {0}")]
    Relabeling(String),

    #[error("operator is not unitary (deviation {0:e})")]
    Unitarity(f64),

    #[error("payoff is not linear: {0}")]
    Linearity(String),

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("index {index} outside table of length {len}")]
    Index { index: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
