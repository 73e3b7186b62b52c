use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid error budget: lambda1={lambda1}, lambda2={lambda2} (need lambda1, lambda2 >= 0 and lambda1 + lambda2 < 1)")]
    InvalidBudget { lambda1: f64, lambda2: f64 },

    #[error("error budget lambda1 + lambda2 = 0 makes the packing radius diverge")]
    DivergentRadius,

    #[error("invalid packing geometry: r = {r} must satisfy 0 < r <= l = {l}")]
    InvalidGeometry { l: f64, r: f64 },

    #[error("codebook construction failed: {0}")]
    ConstructionFailed(String),

    #[error("threshold calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("hash range M = {range} exceeds 2^{length} distinct binary codewords")]
    RangeTooLarge { range: u64, length: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("asymptotic entropy undefined for peak * slot duration = 0")]
    AsymptoticUndefined,

    #[error("config validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("unsupported result schema version {found} (expected {expected})")]
    UnsupportedSchema { found: u32, expected: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidBudget { .. } => "invalid-budget",
            Error::DivergentRadius => "divergent-radius",
            Error::InvalidGeometry { .. } => "invalid-geometry",
            Error::ConstructionFailed(_) => "construction-failed",
            Error::CalibrationFailed(_) => "calibration-failed",
            Error::RangeTooLarge { .. } => "range-too-large",
            Error::PreconditionViolated(_) => "precondition-violated",
            Error::AsymptoticUndefined => "asymptotic-undefined",
            Error::Validation(_) => "validation",
            Error::UnsupportedSchema { .. } => "unsupported-schema",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
