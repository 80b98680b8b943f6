use masi_core::CoreError;
use masi_model::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("incompatible inputs: {0}")]
    Compatibility(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl EvalError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        EvalError::Usage(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;
