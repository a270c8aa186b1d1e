use thiserror::Error;
use visrec_autodiff::binio::FormatError;
use visrec_autodiff::AutodiffError;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("sample {index} at (u, v) = ({u}, {v}) is outside the Nyquist bound of a {height}x{width} grid")]
    OutOfBounds {
        index: usize,
        u: f64,
        v: f64,
        height: usize,
        width: usize,
    },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: (usize, usize), right: (usize, usize) },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error(transparent)]
    Format(#[from] FormatError),
}

impl CoreError {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        CoreError::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Format(FormatError::Io(e))
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
