use std::path::PathBuf;

/// Errors produced anywhere in the matching pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    /// Symmetric factorization broke down; `pivot` is the zero-based failing pivot.
    #[error("singular system at pivot {pivot}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Singular { pivot: usize, context: Option<String> },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a context label (typically a location id) to a singularity error.
    pub fn with_context(self, label: &str) -> Self {
        match self {
            Error::Singular { pivot, .. } => Error::Singular {
                pivot,
                context: Some(label.to_string()),
            },
            other => other,
        }
    }

    /// Short machine-readable kind, used for JSON diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Singular { .. } => "singular",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
