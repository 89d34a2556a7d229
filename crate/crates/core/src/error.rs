use thiserror::Error;

/// Errors produced while building, inverting, measuring or calibrating a network.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("port count {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("invalid coupler coefficients t={t}, r={r}: both must lie in [0, 1]")]
    InvalidCoupler { t: f64, r: f64 },

    #[error("transfer matrix is singular or ill-conditioned (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("phase {phase} on channel {channel} is outside actuator bounds [{lo}, {hi}]")]
    OutOfBounds {
        channel: usize,
        phase: f64,
        lo: f64,
        hi: f64,
    },

    #[error("sweep at stage {stage} found no interference contrast")]
    DegenerateInterference { stage: usize },

    #[error("channel mapping is inconsistent with the device: {0}")]
    InvalidMapping(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
