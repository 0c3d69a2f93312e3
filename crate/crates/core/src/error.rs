use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("truncation at {levels} levels leaves tail mass {achieved:.3e} above tolerance {tolerance:.3e}; need at least {required} levels")]
    Truncation {
        levels: usize,
        required: usize,
        achieved: f64,
        tolerance: f64,
    },

    #[error("transition coefficient P[{row}->{col}] = {value:.3e} is negative beyond tolerance; increase working precision")]
    NumericalInstability { row: usize, col: usize, value: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("cumulant generating function undefined at the origin")]
    UndefinedAtOrigin,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
