use thiserror::Error;

/// Errors raised by the lattice, metric and spectral layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("degree {degree} out of range for dimension {dim}")]
    Degree { degree: usize, dim: usize },
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("metric sample at site {site} is not SPD: {reason}")]
    NotSpd { site: usize, reason: String },
    #[error("invalid metric parameters: {0}")]
    MetricParams(String),
    #[error("inadmissible exponent ledger: {0}")]
    Inadmissible(String),
    #[error("solver failed to converge: {0}")]
    NoConvergence(String),
    #[error("{0}")]
    Invalid(String),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
