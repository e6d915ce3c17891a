use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: radius {r} outside tabulated range [{lo}, {hi}]")]
    Range { r: f64, lo: f64, hi: f64 },

    #[error("argument error: {0}")]
    Argument(String),

    #[error("accuracy error: {what} reached tolerance {achieved:e} (requested {requested:e})")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("resource error: {0}")]
    Resource(String),

    #[error("precondition failed: delta {delta} must lie in (0, m_tau) with m_tau = {m_tau}")]
    DeltaTooLarge { delta: f64, m_tau: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("evaluation error: integrand is NaN at node {node} ({point})")]
    NanIntegrand { node: usize, point: Complex64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("kernel table too short: degree {needed} required, table holds {available}")]
    KernelReach { needed: usize, available: usize },

    #[error("truncation error: Taylor tail bound {bound:e} exceeds {limit:e}")]
    Truncation { bound: f64, limit: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
