use thiserror::Error;

use crate::model::Allocation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("circularity index is undefined for zero demand")]
    UndefinedIndex,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("malformed linear program: {0}")]
    InvalidProgram(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// A search hit its work cap. `incumbent` is the best integer solution
    /// seen before stopping, if any.
    #[error("resource limit reached: {message}")]
    ResourceLimit {
        message: String,
        incumbent: Option<Box<Allocation>>,
    },

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("tax alone cannot move demand from {from} to {to}")]
    NoThreshold { from: String, to: String },

    #[error("calibration failed: {}", .0.join("; "))]
    Calibration(Vec<String>),
}
