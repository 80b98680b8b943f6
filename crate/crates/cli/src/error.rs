use masi_core::CoreError;
use masi_eval::EvalError;
use masi_model::ModelError;
use masi_numerics::NumericsError;

/// A failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Usage(m) => CliError::Usage(m),
            ModelError::Compatibility(m) => CliError::Usage(format!("incompatible inputs: {m}")),
            ModelError::Numerics(n) => n.into(),
            ModelError::Core(c) => c.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Usage(m) => CliError::Usage(m),
            EvalError::Compatibility(m) => CliError::Usage(format!("incompatible inputs: {m}")),
            EvalError::Data(m) => CliError::Data(m),
            EvalError::Model(m) => m.into(),
            EvalError::Core(c) => c.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
