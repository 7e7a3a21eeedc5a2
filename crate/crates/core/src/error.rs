//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("ill-conditioned jacobian (condition number {cond:.3e})")]
    IllConditionedJacobian { cond: f64 },

    #[error("arc length {requested} outside [0, {total}]")]
    ArcLengthOutOfRange { requested: f64, total: f64 },

    #[error("divergent geometry: {0}")]
    DivergentGeometry(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
