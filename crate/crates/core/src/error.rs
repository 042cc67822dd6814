use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite result while evaluating {0}")]
    NonFinite(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("singular point: |dC/dphi| = {derivative:e} is below threshold {threshold:e}")]
    SingularPoint { derivative: f64, threshold: f64 },

    #[error("zero derivative: phi_{index} vanishes")]
    ZeroDerivative { index: usize },

    #[error("linear system for M is rank deficient")]
    RankDeficientSystem,

    #[error("det M(phi) does not vanish identically: |det| = {det:e} at phi = {phi}")]
    GateNotSatisfied { det: f64, phi: f64 },

    #[error("arity mismatch: {0}")]
    Arity(String),

    #[error("empty level set: {0}")]
    EmptyLevelSet(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("solver coverage: {failed} of {total} points failed")]
    SolverCoverage { failed: usize, total: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
