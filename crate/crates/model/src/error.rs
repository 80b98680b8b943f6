use masi_core::CoreError;
use masi_numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("incompatible inputs: {0}")]
    Compatibility(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl ModelError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        ModelError::Usage(msg.into())
    }

    /// True for NaN/Inf failures during training or inference.
    pub fn is_numeric(&self) -> bool {
        matches!(self, ModelError::Numerics(e) if e.is_numeric())
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
