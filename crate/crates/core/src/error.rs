use thiserror::Error;

/// Errors raised by the channel models, fitters and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    /// The data cannot identify the requested parameters.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A numerical solver gave up.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("invalid input data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Degenerate(_) | Error::Parse(_) | Error::Json(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
