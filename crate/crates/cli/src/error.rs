use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Invalid or inconsistent configuration; the CLI exits with code 2.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("missing input files:\n  {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n  "))]
    MissingFiles(Vec<PathBuf>),

    #[error("{path} already exists; pass --force to overwrite")]
    OutputExists { path: PathBuf },

    #[error("frames without a match: {}", .0.join(", "))]
    Unmatched(Vec<String>),

    #[error("external inpainter: {0}")]
    External(String),

    #[error(transparent)]
    Core(#[from] erasure_core::Error),

    #[error(transparent)]
    Net(#[from] erasure_net::NetError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    pub fn input(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Input {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_))
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
