use thiserror::Error;

use crate::protocol::ProtocolError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A cell that is not strictly `0` or `1`. Rows and columns are 1-based,
    /// rows counted after the header.
    #[error("row {row}, column `{column}`: expected 0 or 1, found `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dataset has no non-dummy rows")]
    EmptyData,

    /// The full feature set cannot separate positive `p` from negative `q`
    /// (both 1-based within their class).
    #[error("dataset is inconsistent: positive {p} and negative {q} share every feature value")]
    Inconsistent { p: usize, q: usize },

    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("protocol aborted: {0}")]
    Protocol(#[from] ProtocolError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
