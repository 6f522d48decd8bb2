use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trace context: {0}")]
    InvalidContext(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator is not affiliated with the context: {0}")]
    NotAffiliated(String),
    #[error("operator is not self-adjoint (defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },
    #[error("{what} failed validation (defect {defect:.3e})")]
    Invalid { what: String, defect: f64 },
    #[error("parity violation: {0}")]
    Parity(String),
    #[error("operands live in different trace contexts")]
    ContextMismatch,
    #[error("exponent mismatch: 1/{p} + 1/{q} != 1/{r}")]
    ExponentMismatch { p: f64, q: f64, r: f64 },
    #[error("operator is not invertible: {0}")]
    NotInvertible(String),
    #[error("level error: {0}")]
    Level(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("ambiguous spectral flow: {0}")]
    Ambiguous(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
