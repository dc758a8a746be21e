//! Pixel-level obstacle metrics restricted to the drivable area.
//!
//! Every distinct score is a threshold and a pixel is detected when its
//! score is at least the threshold, so equal scores enter the detected set
//! together. Dataset metrics pool pixels across frames.

mod curves;
mod metrics;

pub use curves::{downsample, export_curves, CurveFiles, PrPoint, RocPoint, MAX_CURVE_POINTS};
pub use metrics::{
    average_precision, evaluate_frame, evaluate_scores, fpr_at_tpr, frame_pixels, pool_frames, sweep, sweep_ap,
    sweep_fpr_at_tpr, DatasetReport, EvalFrame, FprAtTpr, FrameReport, MetricFlag, MetricReport, Sweep, SweepPoint,
    TPR_TARGET,
};
