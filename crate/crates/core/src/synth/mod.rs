//! Synthetic obstacle training data: harvest object cutouts from annotated
//! frames, paste them onto the drivable area, augment the original stream
//! and schedule crops. [`toy`] generates procedural scenes for desk-scale
//! experiments.

mod augment;
mod cutouts;
mod paste;
mod schedule;
pub mod toy;

pub use augment::{augment_high_freq, gaussian_blur, lattice_noise, AugmentParams};
pub use cutouts::{extract_cutouts, CutoutFilter, ExtractionReport, ObjectCutout};
pub use paste::{paste_obstacles, sample_placement, PasteOutcome, PasteParams, Placement};
pub use schedule::{build_epoch_plan, EpochPlan, FrameInfo, ScheduleEntry};
