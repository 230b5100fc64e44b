use thiserror::Error;

use crate::game::RuleViolation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate quadratic form (zero determinant)")]
    Degenerate,

    #[error("quadratic form is definite, an indefinite form is required")]
    Definite,

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    #[error("zero vector has no radial projection")]
    ZeroVector,

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rule violation: {0}")]
    Rule(#[from] RuleViolation),

    /// A finding, not a usage error: a checked bound or round invariant failed.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl Error {
    /// Whether the error is a resource cap (overflow or budget) rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Overflow(_) | Error::Budget(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
