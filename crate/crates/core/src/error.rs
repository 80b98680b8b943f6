use thiserror::Error;

use crate::qtc::QtcVector;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("degenerate pair: agents {distance:.3e} m apart, reference line undefined")]
    DegeneratePair { distance: f64 },
    #[error("QTC vector {0} is not in the dictionary")]
    UnknownVector(QtcVector),
    #[error("dictionary index {index} out of range for {size} entries")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("corrupt file: {0}")]
    Corruption(String),
    #[error("incompatible inputs: {0}")]
    Compatibility(String),
    #[error("scenario generation failed: {0}")]
    Generation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        CoreError::Usage(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        CoreError::Data(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by how the library was called rather than by input data.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            CoreError::Usage(_)
                | CoreError::Compatibility(_)
                | CoreError::Unsupported(_)
                | CoreError::IndexOutOfRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
