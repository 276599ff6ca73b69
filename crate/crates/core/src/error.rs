use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::torus::MAX_DIM)]
    DimensionTooLarge(usize),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("mean direction undefined: resultant length {0:e} is below tolerance")]
    UndefinedMean(f64),

    #[error("circular correlation undefined: zero denominator")]
    DegenerateCorrelation,

    #[error("lattice box with {points} points exceeds the cap of {cap}")]
    LatticeTooLarge { points: u128, cap: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("model density underflows at every lattice point")]
    DensityUnderflow,

    #[error("scatter update became degenerate at iteration {iteration}")]
    DegenerateScatter { iteration: usize, mu: Vec<f64> },

    #[error("weight sum {weight_sum:.3e} is below the {required} needed for a scatter update")]
    SingularUpdate { weight_sum: f64, required: usize },

    #[error("no starting candidate produced a positive definite scatter")]
    InitializationFailed,

    #[error("every candidate fit failed: {0}")]
    NoCandidate(String),

    #[error("numerical routine failed: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
