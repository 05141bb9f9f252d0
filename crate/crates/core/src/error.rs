use thiserror::Error;

pub type Result<T> = std::result::Result<T, SubicError>;

#[derive(Debug, Error)]
pub enum SubicError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("target column `{0}` not found in header")]
    MissingTarget(String),

    #[error("target column `{0}` appears more than once in header")]
    DuplicateTarget(String),

    #[error("invalid cell at row {row}, column `{column}`: `{value}`")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("data too small: {0}")]
    TooSmall(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl SubicError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SubicError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
