use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DiscError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DiscError {
    #[error("{path}: line {line}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        value: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("feature sets differ: missing from second dataset {missing:?}, extra in second dataset {extra:?}")]
    Alignment {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl DiscError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DiscError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, DiscError::Numeric(_))
    }
}
