//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A variable name was referenced that the search space does not declare.
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    /// A value does not fit the domain of the variable it was bound to.
    #[error("value {value} is invalid for variable `{variable}`: {reason}")]
    DomainMismatch {
        variable: String,
        value: String,
        reason: String,
    },

    /// Two assignments bind the same variable and cannot be merged.
    #[error("variable `{0}` is bound on both sides of a merge")]
    OverlappingBinding(String),

    /// A domain declaration is internally inconsistent (empty bounds, no labels, ...).
    #[error("invalid domain for `{variable}`: {reason}")]
    InvalidDomain { variable: String, reason: String },

    /// A search space declaration is invalid as a whole.
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    /// Cutpoints handed to a range split are unusable.
    #[error("invalid cutpoints for `{variable}`: {reason}")]
    InvalidCutpoints { variable: String, reason: String },

    /// A block was asked to optimize over zero free variables.
    #[error("reduced search space is empty")]
    EmptySpace,

    /// A statistic was requested from a history that cannot support it.
    #[error("history holds no suitable trials: {0}")]
    EmptyHistory(String),

    /// Costs are nonnegative by definition.
    #[error("negative cost {0} rejected")]
    NegativeCost(f64),

    /// Fidelity must lie in (0, 1].
    #[error("fidelity {0} outside (0, 1]")]
    InvalidFidelity(f64),

    /// A plan tree failed structural validation.
    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    /// A numeric argument was out of range for the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No benchmark is registered under the requested name.
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    /// An exhaustive grid would exceed the evaluation cap.
    #[error("grid of {size} points exceeds the limit of {limit}")]
    GridTooLarge { size: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
