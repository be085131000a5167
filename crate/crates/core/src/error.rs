use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A linear system is singular or too badly conditioned to trust.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("overflow: {0}")]
    Overflow(String),

    /// A numerical routine could not reach its accuracy target.
    #[error("numerical failure in {what}: achieved {achieved:e}, required {required:e}")]
    Accuracy {
        what: &'static str,
        achieved: f64,
        required: f64,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("output error: {0}")]
    Io(String),
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery itself, as opposed to
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Overflow(_) | Error::Accuracy { .. } | Error::Eigen(_)
        )
    }
}
