use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid under-resolved: {what} needs at least {required} samples, grid provides {available:.1}")]
    Resolution {
        what: &'static str,
        required: f64,
        available: f64,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("fit did not converge after {iterations} iterations (cost {cost:.6e}, last relative step {last_step:.3e})")]
    Fit {
        iterations: usize,
        cost: f64,
        last_step: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
