use chrono::NaiveDate;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("extraction error: missing field `{0}`")]
    MissingField(String),

    #[error("integrity error for key {key}: existing digest {existing}, new digest {incoming}")]
    Integrity {
        key: String,
        existing: String,
        incoming: String,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("snapshot not found for {asset} on {date}")]
    SnapshotNotFound { asset: String, date: NaiveDate },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
