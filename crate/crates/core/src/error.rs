use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least 2 cells per axis, got {0}")]
    GridTooCoarse(usize),
    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),
    #[error("shape mismatch: expected {expected} values, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("coercivity margin {margin} is not positive")]
    Coercivity { margin: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
