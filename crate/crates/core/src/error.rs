use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid construction: {0}")]
    Construction(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{0}")]
    Config(String),
    #[error("signal mismatch: {0}")]
    Mismatch(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("ILC diverged: {0}")]
    Divergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code: 1 for configuration and validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence(_) | Error::Io(_) | Error::Json(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
