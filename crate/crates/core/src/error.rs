use thiserror::Error;

/// Errors raised by the optimizers, oracles and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("example index {index} out of range for {n} examples")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty feasible set: anchor norm {anchor_norm} exceeds outer radius {radius}")]
    EmptyIntersection { anchor_norm: f64, radius: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("solver diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("reference solve hit the iteration cap ({iterations}) without meeting tolerance {tolerance}")]
    ReferenceNotConverged { iterations: usize, tolerance: f64 },
    #[error("reference certificate failed: residual {residual} exceeds {bound}")]
    ReferenceCertificate { residual: f64, bound: f64 },
    #[error("slope fit needs at least 4 usable points, got {0}")]
    TooFewPoints(usize),
    #[error("nonpositive error value {0} (reference optimum too loose?)")]
    NonPositiveError(f64),
    #[error("x values must be positive and strictly increasing")]
    BadAbscissa,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
