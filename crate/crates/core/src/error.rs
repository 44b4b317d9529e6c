use std::path::PathBuf;

/// Errors produced by the forward models, fits and file layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular response: {0}")]
    Singular(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing input files: {}", list_paths(.0))]
    MissingInputs(Vec<PathBuf>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn list_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Reject non-finite or negative values for a named rate/occupancy.
pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::param(name, format!("must be finite, got {value}")));
    }
    if value < 0.0 {
        return Err(Error::param(name, format!("must be >= 0, got {value}")));
    }
    Ok(())
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::param(name, format!("must be > 0, got {value}")));
    }
    Ok(())
}
