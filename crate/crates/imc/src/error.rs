use thiserror::Error;

/// Errors produced by model construction and inference.
#[derive(Debug, Error)]
pub enum ImcError {
    /// Two objects were combined that live on different state spaces.
    #[error("state space mismatch: {0}")]
    SpaceMismatch(String),

    /// A model violates the invariants of its family.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A constraint set has an empty feasible region.
    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    /// An argument is outside the documented domain of an operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A configurable size cap would be exceeded.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    /// An internal invariant failed; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, ImcError>;
