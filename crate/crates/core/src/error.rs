use thiserror::Error;

pub type Result<T, E = RfimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RfimError {
    /// A request would exceed a configured size cap.
    #[error("{what}: requested {requested} exceeds cap {cap}")]
    Capacity {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration key failed validation.
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("no records found in {0}")]
    NoRecords(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RfimError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RfimError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        RfimError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
