use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel specification: {0}")]
    InvalidSpec(String),

    #[error("kernel `{family}` has no classical derivative here{detail}")]
    UnsupportedDerivative { family: String, detail: &'static str },

    #[error("invalid quadrature resolution: {0}")]
    InvalidResolution(String),

    #[error("Gram matrix is singular (smallest pivot {pivot:e} at jitter {jitter:e})")]
    SingularGram { pivot: f64, jitter: f64 },

    #[error("Cholesky factorization failed; residual variance {required_jitter:e} exceeds the jitter ceiling")]
    CholeskyFailure { required_jitter: f64 },

    #[error("coefficient of term {term} lacks the derivative of order {order} needed by the adjoint")]
    MissingCoefficientDerivative { term: usize, order: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Field(String),
}

pub type Result<T> = std::result::Result<T, Error>;
