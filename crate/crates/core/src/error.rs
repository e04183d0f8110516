use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("scene generation failed after {attempts} attempts: constraint `{constraint}` could not be satisfied")]
    Generation { constraint: String, attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("slot tracking failed: {0}")]
    Tracking(String),

    #[error("unknown class id {0}")]
    UnknownClass(usize),

    #[error("codebook is empty")]
    EmptyCodebook,

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("variant misuse: {0}")]
    VariantMisuse(String),

    #[error("invalid sampling temperature {0} (must be > 0 unless argmax is requested)")]
    InvalidTemperature(f64),

    #[error("config hash mismatch: checkpoint was built for {found}, current config is {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("missing data: {0}")]
    Missing(String),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
