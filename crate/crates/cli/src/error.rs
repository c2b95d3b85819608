use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: sinai_core::Error,
    },
    #[error("corrupt bundle {path}: {reason}")]
    CorruptBundle { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn stage(stage: &'static str, source: sinai_core::Error) -> Self {
        CliError::Stage { stage, source }
    }
}
