use thiserror::Error;

/// Every failure the laboratory can report.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-finite state at step {step}{}", node.map(|n| format!(", node {n}")).unwrap_or_default())]
    NonFinite { step: usize, node: Option<usize> },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("stiffness guard: lambda*dt = {product:.4} must stay below 1/2")]
    Stiffness { product: f64 },
    #[error("ensemble too small: need at least {need}, got {got}")]
    Ensemble { need: usize, got: usize },
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("kernel cache checksum mismatch in {0}")]
    Checksum(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
