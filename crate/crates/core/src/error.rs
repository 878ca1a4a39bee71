use thiserror::Error;

/// Errors raised by the selection algorithms and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cohort size k = {k} exceeds the number of candidates n = {n}")]
    CohortTooLarge { k: usize, n: usize },

    #[error("stream ended after {seen} candidates, fewer than k = {k}")]
    StreamTooShort { seen: usize, k: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by bad configuration or input data.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::CohortTooLarge { .. }
                | Error::StreamTooShort { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
