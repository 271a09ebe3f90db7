use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weighted controllability Gramian is singular at tau = {tau}")]
    SingularGramian { tau: f64 },

    #[error("no admissible arrival time in [{tau_min}, {tau_max}] yields an invertible Gramian")]
    Unsteerable { tau_min: f64, tau_max: f64 },

    #[error("no collision-free state found after {0} consecutive rejections")]
    InfeasibleSpace(usize),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },

    #[error("unknown scenario or system `{0}`")]
    Unknown(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidScenario {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
