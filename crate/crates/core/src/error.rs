use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown attribute word `{0}`")]
    UnknownAttribute(String),

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("no template for {0}")]
    MissingTemplate(String),

    #[error("malformed annotation tag `{0}`")]
    MalformedTag(String),

    #[error("malformed record at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("act {0} is not legal here")]
    IllegalAct(String),

    #[error("no legal actions")]
    NoLegalActions,

    #[error("tutoring cost must be positive")]
    ZeroCost,

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("session `{0}` has ended")]
    SessionEnded(String),

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
