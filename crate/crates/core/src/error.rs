use thiserror::Error;

/// Errors raised while building or applying the two-level method.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("malformed sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not positive semidefinite on the given vector (x^T A x = {0:e})")]
    NotPositive(f64),

    #[error("test vector {index} is identically zero")]
    ZeroTestVector { index: usize },

    #[error("nonpositive Rayleigh quotient for test vector {index}")]
    NonPositiveRayleigh { index: usize },

    #[error("vector has zero denominator in smoothness ratio")]
    ZeroDenominator,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("interpolatory set of size {set} exceeds the number of test vectors {k}")]
    UnderdeterminedFit { set: usize, k: usize },

    #[error("vector is zero on the fine set")]
    ZeroOnFine,

    #[error("compatible relaxation did not reach rho_f <= {delta} within {stages} stages (last rho_f = {rho_f})")]
    CoarseningFailed { stages: usize, delta: f64, rho_f: f64 },

    #[error("coarse operator is singular: pivot {pivot:e} at coarse row {row}")]
    SingularCoarse { row: usize, pivot: f64 },

    #[error("vertex {0} is not a coarse point")]
    NotCoarse(usize),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
