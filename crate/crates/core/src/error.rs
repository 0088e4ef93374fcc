use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An operation was issued in a state that does not allow it.
    #[error("invalid state: {0}")]
    State(String),

    /// The ask/tell protocol was not respected.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Training diverged.
    #[error("training error: {message}\n{dump}")]
    Training { message: String, dump: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
