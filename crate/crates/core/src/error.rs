use thiserror::Error;

#[derive(Debug, Error)]
pub enum MomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The quartile normalizer of a regression direction vanished.
    #[error("degenerate direction: first-quartile block energy is zero")]
    DegenerateDirection,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MomError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MomError::InvalidArgument(msg.into()))
}
