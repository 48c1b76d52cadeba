use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: String,
        range: &'static str,
        value: f64,
    },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid iteration spec: {0}")]
    InvalidSpec(String),

    #[error("argument x = 0 lies outside the domain")]
    ZeroArgument,

    #[error("inadmissible pair (x = {x}, y = {y}): {constraint}")]
    Inadmissible { x: f64, y: f64, constraint: String },

    #[error("no exact solution: failed {}", failed.join(", "))]
    NoExactSolution { failed: Vec<String> },

    #[error("expansion order {0} exceeds the supported maximum of 40")]
    OrderTooLarge(usize),

    #[error("contraction constant P = {0} is not below 1")]
    NotContractive(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn out_of_range(name: &str, range: &'static str, value: f64) -> Error {
    Error::OutOfRange {
        name: name.to_string(),
        range,
        value,
    }
}
