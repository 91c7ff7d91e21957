use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("operator is singular (smallest scale {0:e})")]
    Singular(f64),

    #[error("no convergence after {iterations} iterations (best estimate {estimate:e}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("truncation mismatch: operator has K={expected}, field has K={got}")]
    TruncationMismatch { expected: usize, got: usize },

    #[error("truncation K={got} too small for h={h}: need K >= {required}")]
    TruncationTooSmall { got: usize, required: usize, h: f64 },

    #[error("probe is not microlocalized: {0}")]
    NotMicrolocalized(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("too few points: got {got}, need at least {required}")]
    TooFewPoints { got: usize, required: usize },

    #[error("nonpositive value {value:e} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LabError {
    LabError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
