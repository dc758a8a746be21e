//! Inpainting by a local program.
//!
//! For every window the context fragment and the hole mask (255 = fill)
//! are written as PNG files to a fresh temporary directory, the configured
//! command runs with `{context}`, `{mask}` and `{output}` replaced by their
//! paths, and the RGB PNG it leaves at `{output}` is read back.

use std::process::Command;

use erasure_core::inpaint::{InpaintError, Inpainter};
use erasure_core::{Plane, RgbImage};

use crate::io::{read_rgb, write_mask, write_rgb};

#[derive(Debug, Clone)]
pub struct ExternalInpainter {
    pub command: Vec<String>,
}

impl ExternalInpainter {
    pub fn new(command: Vec<String>) -> Self {
        Self { command }
    }
}

impl Inpainter for ExternalInpainter {
    fn inpaint(&self, context: &RgbImage, hole: &Plane<bool>) -> Result<RgbImage, InpaintError> {
        let (program, args) = self.command.split_first().ok_or("empty inpainter command")?;
        let dir = tempfile::tempdir()?;
        let context_path = dir.path().join("context.png");
        let mask_path = dir.path().join("mask.png");
        let output_path = dir.path().join("output.png");
        write_rgb(&context_path, context)?;
        write_mask(&mask_path, hole)?;
        let substitute = |a: &String| {
            a.replace("{context}", &context_path.to_string_lossy())
                .replace("{mask}", &mask_path.to_string_lossy())
                .replace("{output}", &output_path.to_string_lossy())
        };
        let out = Command::new(substitute(program))
            .args(args.iter().map(substitute))
            .output()
            .map_err(|e| format!("cannot run {program}: {e}"))?;
        if !out.status.success() {
            return Err(format!(
                "{program} exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )
            .into());
        }
        let filled = read_rgb(&output_path)?;
        if filled.dims() != context.dims() {
            return Err(format!("{program} returned {:?} for a {:?} context", filled.dims(), context.dims()).into());
        }
        Ok(filled)
    }
}
