use thiserror::Error;

/// Errors raised by the simulation and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} modes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value {value} at z = {z}")]
    NonFiniteSample { z: f64, value: f64 },

    #[error("non-finite spectral coefficient at index {index}")]
    NonFiniteCoefficient { index: usize },

    #[error("point z = {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("flow integration produced a non-finite field after t = {last_valid}")]
    FlowBlowUp { last_valid: f64 },

    #[error("jump rate {rate} exceeds the declared bound {bound} (model misdeclared)")]
    RateBoundViolated { rate: f64, bound: f64 },

    #[error("jump kernel row is empty")]
    EmptyKernel,

    #[error("total jump rate is zero: no jump possible from this state")]
    NoJump,

    #[error("more than {0} jumps before the horizon")]
    JumpCapExceeded(usize),

    #[error("control {0} is not a member of the control grid")]
    InvalidControl(f64),

    #[error("mode is not part of the enumerated mode set")]
    UnknownMode,

    #[error("model does not enumerate its modes")]
    ModesNotEnumerable,

    #[error("lattice extrapolation: feature {feature} = {value} outside [{lo}, {hi}]")]
    Extrapolation {
        feature: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("value iteration is not contracting; residual history {0:?}")]
    NonContraction(Vec<f64>),

    #[error("jump cap {cap} too small: truncation bound {bound:.3e} exceeds tolerance {tol:.3e}")]
    JumpCapTooSmall { cap: usize, bound: f64, tol: f64 },

    #[error("intensity change ν = {value} outside [{min}, {max}]")]
    NuOutOfBounds { value: f64, min: f64, max: f64 },

    #[error("explicit scheme is unstable: {0}")]
    Unstable(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
