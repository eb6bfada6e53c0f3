use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spin magnitude {0}: 2j must be a positive integer")]
    InvalidSpin(f64),

    #[error("non-finite model parameter: {0}")]
    NonFiniteParameter(&'static str),

    #[error("operator dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver failed to converge")]
    EigenNoConvergence,

    #[error("state index {index} out of range for dimension {dim}")]
    StateOutOfRange { index: usize, dim: usize },

    #[error("degenerate state: gap {gap:e} below guard {guard:e}")]
    DegenerateState { gap: f64, guard: f64 },

    #[error("state tracking lost (best overlap {0:.3})")]
    StateTrackingLost(f64),

    #[error("singular metric (det {det:e} <= floor {floor:e})")]
    SingularMetric { det: f64, floor: f64 },

    #[error("grid is not uniform along {0}")]
    NonUniformGrid(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("singular at {0}")]
    SingularAt(String),

    #[error("extremum lies on the curve boundary (index {0})")]
    ExtremumOnBoundary(usize),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("fit did not converge after {iterations} iterations")]
    FitNoConvergence { iterations: usize },

    #[error("schema error: missing or misplaced column \"{0}\"")]
    SchemaColumn(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
