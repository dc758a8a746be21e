//! Road obstacle detection by erasing.
//!
//! The drivable area of a frame is inpainted window by window, the window
//! inpaintings are blended with center-distance weights, and a learned
//! comparator (see the `erasure-net` crate) scores how much the original
//! and the erased image disagree. This crate holds everything except the
//! network:
//!
//! * [`inpaint`] – window planning, the inpainter interface, patch fusion and
//!   the baseline diffusion inpainter.
//! * [`drivable`] – drivable-area ROI from a semantic map, and the
//!   segmentation-only scorer.
//! * [`synth`] – cutout extraction, obstacle pasting, high-frequency
//!   augmentation, crop schedules and the procedural toy-road generator.
//! * [`eval`] – ROI-restricted AP / FPR95, frame pooling and curve export.

pub mod drivable;
pub mod error;
pub mod eval;
pub mod image;
pub mod inpaint;
pub mod synth;

pub use crate::error::{Error, Result};
pub use crate::image::{Heatmap, LabelMask, Plane, Rect, RgbImage, RoiMask};
