use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),

    #[error("resonant denominator is singular (rR = {0} >= 1)")]
    SingularResonance(f64),

    #[error(
        "fiber overlap quadrature did not converge: {points} points, relative change {relative_change:.3e} on step halving"
    )]
    QuadratureNotConverged { points: usize, relative_change: f64 },

    #[error("on-peak coupled intensity is zero; fiber is not positioned on a resonance")]
    ZeroPeak,

    #[error("sample grid too coarse: step {step:.4e} {unit}, need at most {required:.4e} {unit}")]
    GridTooCoarse {
        step: f64,
        required: f64,
        unit: &'static str,
    },

    #[error("no bracket for the minimum: objective is monotone over half-widths {lower:.4e}..{upper:.4e} Hz ({points} points scanned)")]
    NoBracket {
        lower: f64,
        upper: f64,
        points: usize,
    },

    #[error("{what} {value} lies outside the calibrated range {lower}..{upper}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("time tags of stream `{stream}` are not sorted at index {index}")]
    Unsorted { stream: &'static str, index: usize },

    #[error("stream `{0}` has no singles")]
    NoSingles(&'static str),

    #[error("expected {expected} tags exceed the memory budget of {budget}; use the streaming generator")]
    MemoryBudget { expected: u64, budget: u64 },

    #[error("mode {mode} is not present in the channel map ({count} channels)")]
    UnknownMode { mode: usize, count: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::param(name, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn unit_interval(name: &'static str, value: f64) -> Result<f64> {
    finite(name, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::param(name, format!("must lie in [0, 1], got {value}")))
    }
}
