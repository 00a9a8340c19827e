use thiserror::Error;

use crate::validate::ValidationReport;

/// Errors raised by model construction, analysis and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("factorial moment of order {0} is not supported (only 1 and 2)")]
    UnsupportedOrder(u32),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A batch law that violates the arrival/state coupling rule (idle <=> no arrivals).
    #[error("batch law violates the idle/active arrival rule: {0}")]
    BatchRule(String),

    #[error("inconsistent shape: {0}")]
    Shape(String),

    #[error("model is invalid:\n{0}")]
    Invalid(ValidationReport),

    #[error("unstable: traffic intensity {rho} is not below 1 - {margin:e}")]
    Unstable { rho: f64, margin: f64 },

    #[error("class {0} is out of range (1..={1})")]
    ClassOutOfRange(usize, usize),

    #[error("(I - T) is singular for class {0}")]
    Singular(usize),

    #[error("system does not match the {case} special case: {reason}")]
    ShapeMismatch { case: &'static str, reason: String },

    #[error("metric {metric} is undefined under the {discipline} discipline")]
    UnsupportedMetric {
        metric: String,
        discipline: &'static str,
    },

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("model file: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
