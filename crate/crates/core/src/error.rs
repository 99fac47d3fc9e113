use thiserror::Error;

/// Errors raised by frames, sets, oracles and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsfwError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate pair: <u,v> = {0} is too close to 1")]
    DegeneratePair(f64),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("point is not feasible: {0}")]
    Infeasible(String),
    #[error("zero gradient")]
    ZeroGradient,
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("oracle failure: {0}")]
    OracleFailure(String),
    #[error("oracle inconsistency: negative gap {0}")]
    NegativeGap(f64),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, RsfwError>;

impl From<std::io::Error> for RsfwError {
    fn from(e: std::io::Error) -> Self {
        RsfwError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for RsfwError {
    fn from(e: serde_json::Error) -> Self {
        RsfwError::Parse(e.to_string())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(RsfwError::DimensionMismatch { expected, got });
    }
    Ok(())
}
