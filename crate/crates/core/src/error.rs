use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid temperature {0}: must be finite and > 0")]
    InvalidTemperature(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The logit row has several maximizers; use `project_hard` for tie-robust selection.
    #[error("ambiguous maximum in row {row}: columns {columns:?} tie")]
    Ambiguous { row: usize, columns: Vec<usize> },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("capacity exceeded: n = {n}, limit = {limit}")]
    Capacity { n: usize, limit: usize },

    #[error("non-finite loss at epoch {epoch}, step {step}: {value}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        value: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
