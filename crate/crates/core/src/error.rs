use thiserror::Error;

/// Errors raised by the simulation, oracle and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no selectable point: total weight is zero")]
    NoSelectablePoint,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("enumeration would produce {predicted} outcomes, limit is {limit}")]
    OutcomeOverflow { predicted: u128, limit: u128 },

    #[error("law is not finitely supported: {0}")]
    NonDiscrete(String),

    #[error("weights are not summable: {0}")]
    NotSummable(String),

    #[error("running average did not stabilise: relative change {change:e} exceeds {tolerance:e}")]
    NotStabilized { change: f64, tolerance: f64 },

    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
