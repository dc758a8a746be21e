use thiserror::Error;

use crate::inpaint::PatchWindow;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} is {got:?}, expected {expected:?}")]
    DimensionMismatch {
        what: &'static str,
        got: (usize, usize),
        expected: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inpainter failed on window {index} (inpaint box {window:?}): {message}")]
    Inpainter {
        index: usize,
        window: PatchWindow,
        message: String,
    },

    #[error("class id {id} at ({x}, {y}) is not in the vocabulary")]
    UnknownClass { id: u16, x: usize, y: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] ::image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
