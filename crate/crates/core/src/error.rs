use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the upper half-plane")]
    DomainViolation { x: f64, y: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid needs at least {min} nodes per axis, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize, min: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("path is not closed (first point {first:?}, last point {last:?})")]
    OpenPath { first: (f64, f64), last: (f64, f64) },

    #[error("point ({x}, {y}) is outside the sampled grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("tensor is not closed: residual {residual:e} exceeds threshold {threshold:e}")]
    Integrability { residual: f64, threshold: f64 },

    #[error("tensor is not invariant under the deck transformation: mismatch {mismatch:e} exceeds {threshold:e}")]
    InvarianceViolation { mismatch: f64, threshold: f64 },

    #[error("linear least-squares solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("non-finite value in iterate at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("kernel basis is degenerate on this grid (Gram condition number {condition:e})")]
    DegenerateBasis { condition: f64 },

    #[error("strip does not cover the required deck translates: {0}")]
    StripTooSmall(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
