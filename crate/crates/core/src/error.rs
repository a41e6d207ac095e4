use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid regularity constants at step {step}: {reason}")]
    InvalidConstants { step: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("horizon mismatch: {what} has length {got}, expected {expected}")]
    HorizonMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate sub-Weibull descriptor (proxy variance would be zero)")]
    DegenerateDescriptor,

    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("step-size interval is empty for r = {r}: lower {lo} exceeds upper {hi}")]
    InfeasibleRate { r: f64, lo: f64, hi: f64 },

    #[error("configuration is not contractive: {0}")]
    NonContractive(String),

    #[error("fixed-point iteration did not reach tolerance {tol} within {max_iter} iterations (residual {residual})")]
    MaxIterations {
        tol: f64,
        max_iter: usize,
        residual: f64,
    },

    #[error("{path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
