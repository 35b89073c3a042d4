use thiserror::Error;

/// Errors raised across the crate. Indices in messages are 1-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("empty matrix")]
    Empty,
    #[error("negative entry at ({x},{y})")]
    NegativeEntry { x: usize, y: usize },
    #[error("entries sum to {actual}, expected 1")]
    SumNotOne { actual: f64 },
    #[error("alphas must be pairwise distinct")]
    DuplicateAlpha,
    #[error("diagonal scaling entries must be strictly positive")]
    NonpositiveScale,
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("Schmidt weights must be positive, sorted descending and sum to at most 1")]
    SchmidtOrder,
    #[error("alphas must sum to zero (got {sum})")]
    AlphaSumNonzero { sum: f64 },
    #[error("row-1 EDM mass {mass} does not exceed mu1 - 1/2 = {needed}")]
    Condition3Violated { mass: f64, needed: f64 },
    #[error("noise strength {0} outside [0, 1]")]
    BadLambda(f64),
    #[error("operator is not bipartite with equal local dimensions")]
    NotBipartite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("trace is {trace}, expected 1")]
    BadTrace { trace: f64 },
    #[error("effects do not sum to the identity (deviation {deviation:e})")]
    Incomplete { deviation: f64 },
    #[error("factor sum is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularSum { min_eigenvalue: f64 },
    #[error("factor sums are not equal and diagonal")]
    NotDiagonalized,
    #[error("factorization invalid: {0}")]
    FactorizationInvalid(String),
    #[error("noise strength must be strictly below 1")]
    LambdaOne,
    #[error("marginal weights are not a strictly positive simplex point")]
    InfeasibleST,
    #[error("correlation has a non-positive entry at ({x},{y})")]
    NotPositive { x: usize, y: usize },
    #[error("feasibility certificate invalid: {0}")]
    CertificateInvalid(String),
    #[error("inconsistent bounds: {0}")]
    InconsistentBounds(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
