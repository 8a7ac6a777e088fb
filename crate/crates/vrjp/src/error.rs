use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite (leading minor {pivot} failed)")]
    NotPositiveDefinite { pivot: usize },

    #[error("vertex subset is not connected")]
    DisconnectedSubset,

    #[error("path enumeration budget exceeded ({visited} nodes, cap {cap})")]
    BudgetExceeded { visited: u64, cap: u64 },

    #[error("degenerate value in {context}: {detail}")]
    Degenerate { context: &'static str, detail: String },

    #[error("inconsistent cycle weights: worst defect {defect:e} exceeds {tol:e}")]
    InconsistentCycles { defect: f64, tol: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("graph file: {0}")]
    GraphFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
