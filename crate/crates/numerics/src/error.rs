use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("invalid argument to {op}: {detail}")]
    Usage { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
}

impl NumericsError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        NumericsError::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn usage(op: &'static str, detail: impl Into<String>) -> Self {
        NumericsError::Usage {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by NaN/Inf rather than by caller mistakes.
    pub fn is_numeric(&self) -> bool {
        matches!(self, NumericsError::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, NumericsError>;
