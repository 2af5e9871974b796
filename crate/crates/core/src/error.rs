use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite kernel value {value} at pair ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },

    #[error(
        "covariance is not positive semidefinite: eigenvalue {eigenvalue} \
         (index {index}) is below -1e-10 * lambda_max = {threshold:e}"
    )]
    NotPositiveSemidefinite {
        eigenvalue: f64,
        index: usize,
        threshold: f64,
    },

    #[error("function is not in the RKHS: residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotInRkhs { residual: f64, tolerance: f64 },

    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: isize, len: usize },

    #[error("insufficient samples: need at least 2 draws, got {0}")]
    InsufficientSamples(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
