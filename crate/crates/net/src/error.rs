use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid model config{}: {message}", level.map(|l| format!(" at level {l}")).unwrap_or_default())]
    Config { level: Option<usize>, message: String },

    #[error("invalid training config: {0}")]
    TrainConfig(String),

    #[error("sample {id}: {message}")]
    Data { id: String, message: String },

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },

    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] erasure_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = NetError> = std::result::Result<T, E>;
