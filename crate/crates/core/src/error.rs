use thiserror::Error;

use crate::numerics::NumericsError;

pub type Result<T, E = LrbError> = std::result::Result<T, E>;

/// Errors raised by kernel, bridge, LRB and pricing operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LrbError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel class mismatch: operation requires a {expected} kernel")]
    ClassMismatch { expected: &'static str },

    #[error("invalid pin: the kernel law of {increment} over {elapsed} is {value}")]
    InvalidPin { elapsed: f64, increment: f64, value: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("unreachable state: psi_{t}(R; {xi}) = {psi}")]
    UnreachableState { t: f64, xi: f64, psi: f64 },

    #[error("t equals the horizon {horizon}; use the terminal posterior for the terminal law")]
    TerminalTime { horizon: f64 },

    #[error("conditional moment of order {order} is infinite")]
    InfiniteMoment { order: u32 },

    #[error("{0} is only defined for the brownian kernel")]
    UnsupportedKernel(&'static str),

    #[error("price function is not monotone at t = {t}; request the generic exercise set")]
    MonotonicityUnverified { t: f64 },

    #[error(transparent)]
    Numeric(#[from] NumericsError),
}

impl LrbError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LrbError::Domain(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        LrbError::InvalidSpec(msg.into())
    }
}
