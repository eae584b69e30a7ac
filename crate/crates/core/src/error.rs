use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),
    #[error("diagonal entry {0} is not strictly positive")]
    NonPositiveDiagonal(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("similarity weight at ({0}, {1}) is not strictly positive")]
    NonPositiveWeight(usize, usize),
    #[error("eigendecomposition failed to converge")]
    EigenDecompositionFailure,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("residual vector of variable {0} has zero variance")]
    ZeroResidualVariance(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("target alpha2 = {target} is not achievable for this alpha1; achievable range is [{low}, {high}]")]
    NoRoot { target: f64, low: f64, high: f64 },
    #[error("sample size {0} is too small")]
    SampleTooSmall(usize),
    #[error("singular correlation submatrix for triangle {0:?}")]
    SingularSubmatrix((usize, usize, usize)),
    #[error("Cholesky factorization failed")]
    CholeskyFailure,
    #[error("infeasible cross dependence: shrink factor {0:.4} below 0.1")]
    InfeasibleCross(f64),
    #[error("no penalty pair matches the target edge counts")]
    MatchFailure,
    #[error("empty rank group: {0}")]
    EmptyGroup(&'static str),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
