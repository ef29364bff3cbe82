use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {requested} exceeds the supported maximum {max}")]
    Capacity { requested: usize, max: usize },
    #[error("expected dimension {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("site {site} out of range for a {sites}-site register")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("eigenstate labeling failed: {0}")]
    Labeling(String),
    #[error("pulse family {0} does not support this operation")]
    UnsupportedShape(String),
    #[error("step size too large: {0}")]
    StepSize(String),
    #[error("calibration failed: best fidelity {best:.6} below {threshold}")]
    Calibration { best: f64, threshold: f64 },
    #[error("fault kind mismatch: {0}")]
    FaultKind(String),
    #[error("invalid circuit: {0}")]
    Circuit(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
