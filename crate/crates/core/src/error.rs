use thiserror::Error;

/// Errors raised by grid construction and the numerical operators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bounds on axis {axis}: lo = {lo}, hi = {hi}")]
    InvalidBounds { axis: usize, lo: f64, hi: f64 },

    #[error("axis {axis} has {n} points, at least 4 are required")]
    TooFewPoints { axis: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("covariance matrix is not symmetric positive definite")]
    NonSpdCovariance,

    #[error("window matrix is not symmetric positive definite")]
    NonSpdWindow,

    #[error("matrix field value at point {index} is not symmetric positive definite")]
    NonSpdAt { index: usize },

    #[error("adaptation matrix at point {index} is singular")]
    SingularMu { index: usize },

    #[error("invalid exponent p = {0}, need p >= 1")]
    InvalidP(f64),

    #[error("function is identically zero")]
    ZeroFunction,

    #[error("lambda = {0} outside the open interval (0, sqrt 2)")]
    LambdaOutOfRange(f64),

    #[error("derivative order {0} is not supported (only 1 and 2)")]
    UnsupportedOrder(usize),

    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("kappa must be positive, got {0}")]
    NonPositiveKappa(f64),

    #[error("size mismatch: {samples} samples but {bandwidths} bandwidths")]
    SizeMismatch { samples: usize, bandwidths: usize },

    #[error("the Wigner transform has a non-negligible imaginary part ({0:e})")]
    NonRealWigner(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
