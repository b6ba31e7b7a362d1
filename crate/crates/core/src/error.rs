use thiserror::Error;

use crate::report::FitReport;

pub type Result<T> = std::result::Result<T, GgmError>;

#[derive(Debug, Error)]
pub enum GgmError {
    #[error("vertex {vertex} out of range for graph with {d} vertices")]
    VertexOutOfRange { vertex: usize, d: usize },

    #[error("index {index} out of range for order {order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("index set must be strictly increasing")]
    UnsortedIndexSet,

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("dimension must be positive")]
    ZeroDimension,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("data table is empty")]
    EmptyData,

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteData { row: usize, col: usize },

    #[error("variable {0} has zero variance")]
    ZeroVariance(usize),

    #[error("marginal covariance on {0:?} is not positive definite")]
    LocalMarginalSingular(Vec<usize>),

    #[error("no convergence after {} cycles", .0.cycles)]
    MaxCyclesExceeded(Box<FitReport>),

    #[error("covariance iterate stabilized while singular (rank {})", .0.rank_trace.last().copied().unwrap_or(0))]
    StuckSingular(Box<FitReport>),

    #[error("update produced a non-finite value")]
    NonFiniteResult,

    #[error("nonpositive Schur complement {value:e} at vertex {vertex}")]
    NonpositiveSchur { vertex: usize, value: f64 },

    #[error("projected concentration matrix is not positive definite (min eigenvalue {min_eig:e})")]
    CertificateViolated { min_eig: f64 },

    #[error("graph is not decomposable")]
    NotDecomposable,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl GgmError {
    /// The partial report carried by non-convergence errors.
    pub fn report(&self) -> Option<&FitReport> {
        match self {
            GgmError::MaxCyclesExceeded(r) | GgmError::StuckSingular(r) => Some(r),
            _ => None,
        }
    }
}
