use std::path::PathBuf;

use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error("field contains a non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("field has non-zero mean {mean} (sup norm {sup}); data escapes the compact-support contract")]
    NonZeroMean { mean: Complex64, sup: f64 },

    #[error("invalid dilatation: {0}")]
    InvalidDilatation(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dilatation is non-zero at {cells} cells outside the domain mask")]
    SupportViolation { cells: usize },

    #[error("log branch failure: dz f winds around zero between cells {from} and {to}")]
    LogBranchFailure { from: usize, to: usize },

    #[error("Newton iteration stalled for target {target} (residual {residual:e})")]
    NewtonStall { target: Complex64, residual: f64 },

    #[error("weight is not strictly positive and finite at cell {index} (value {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("exponential weight overflows f64: {0}")]
    Overflow(String),

    #[error("degenerate boundary: nodes {i} and {j} coincide")]
    DegenerateBoundary { i: usize, j: usize },

    #[error("domain does not fit in the central half of the window: {0}")]
    DomainTooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed dump {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
