//! `evaluate`: pooled and per-frame metrics of a variant's heatmaps.

use std::collections::BTreeSet;
use std::path::PathBuf;

use erasure_core::eval::{export_curves, pool_frames, DatasetReport, EvalFrame, FrameReport, MetricReport};
use erasure_core::image::RoiSource;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, Variant};
use crate::dataset::{Frames, Require};
use crate::error::{PipelineError, Result};
use crate::infer::{heatmap_dir, variant_dir};
use crate::io::{read_heatmap, read_json, read_labels, read_mask, write_json, HeatmapFiles, HeatmapInfo};

/// Contents of `report.json`. Per-frame reports carry no curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub variant: Variant,
    pub roi_source: RoiSource,
    pub config_sha256: String,
    pub pooled: MetricReport,
    pub frames: Vec<FrameReport>,
}

#[derive(Serialize)]
struct FrameRow<'a> {
    id: &'a str,
    ap: Option<f64>,
    fpr95: Option<f64>,
    tpr95_reachable: bool,
    positives: u64,
    negatives: u64,
    undetectable_positives: u64,
    positive_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluateSummary {
    pub dir: PathBuf,
    pub report: EvaluationReport,
}

/// Pair every frame with its heatmap. Frames without a heatmap and
/// heatmaps without a frame are both errors.
fn load_eval_frames(cfg: &PipelineConfig, variant: Variant, frames: &Frames) -> Result<(Vec<EvalFrame>, RoiSource)> {
    let dir = heatmap_dir(cfg, variant);
    let known: BTreeSet<&str> = frames.frames.iter().map(|f| f.id.as_str()).collect();
    let mut unmatched: Vec<String> = frames
        .frames
        .iter()
        .filter(|f| !HeatmapFiles::new(&dir, &f.id).sidecar.exists())
        .map(|f| format!("{} (no heatmap)", f.id))
        .collect();
    if dir.is_dir() {
        for entry in std::fs::read_dir(&dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if !known.contains(id) {
                    unmatched.push(format!("{id} (no frame)"));
                }
            }
        }
    }
    if !unmatched.is_empty() {
        unmatched.sort();
        return Err(PipelineError::Unmatched(unmatched));
    }

    let loaded: Vec<(EvalFrame, RoiSource)> = frames
        .frames
        .par_iter()
        .map(|rec| {
            let files = HeatmapFiles::new(&dir, &rec.id);
            let info: HeatmapInfo = read_json(&files.sidecar)?;
            if info.frame_id != rec.id || info.variant != variant {
                return Err(PipelineError::input(
                    &files.sidecar,
                    format!("describes frame {} of variant {}", info.frame_id, info.variant),
                ));
            }
            let heatmap = read_heatmap(&files.heatmap)?;
            if heatmap.dims() != (info.width, info.height) {
                return Err(PipelineError::input(&files.heatmap, "size differs from its sidecar"));
            }
            let detection_roi = match info.roi_source {
                RoiSource::Predicted => Some(read_mask(&files.roi)?),
                RoiSource::GroundTruth => None,
            };
            let frame = EvalFrame {
                id: rec.id.clone(),
                heatmap,
                labels: read_labels(&rec.labels)?,
                roi: read_mask(&rec.roi)?,
                detection_roi,
            };
            Ok((frame, info.roi_source))
        })
        .collect::<Result<_>>()?;
    let source = loaded.first().map_or(cfg.roi.source, |l| l.1);
    if loaded.iter().any(|l| l.1 != source) {
        return Err(PipelineError::input(dir, "heatmaps mix ground-truth and predicted ROIs"));
    }
    Ok((loaded.into_iter().map(|l| l.0).collect(), source))
}

/// Evaluate `variant`'s heatmaps and write `report.json`, `frames.csv` and
/// the pooled PR/ROC curves next to them.
pub fn evaluate_variant(cfg: &PipelineConfig, variant: Variant) -> Result<EvaluateSummary> {
    let frames = Frames::load(&cfg.paths.frames, Require::ALL)?;
    let (eval_frames, roi_source) = load_eval_frames(cfg, variant, &frames)?;
    let DatasetReport { pooled, mut frames } = pool_frames(&eval_frames)?;
    for f in &mut frames {
        f.report.pr_curve.clear();
        f.report.roc_curve.clear();
    }
    let dir = variant_dir(cfg, variant);
    let report = EvaluationReport {
        variant,
        roi_source,
        config_sha256: cfg.hash(),
        pooled,
        frames,
    };
    write_json(&dir.join("report.json"), &report)?;
    let mut w = csv::Writer::from_path(dir.join("frames.csv"))?;
    for f in &report.frames {
        let r = &f.report;
        w.serialize(FrameRow {
            id: &f.id,
            ap: r.ap,
            fpr95: r.fpr95,
            tpr95_reachable: r.tpr95_reachable,
            positives: r.positives,
            negatives: r.negatives,
            undetectable_positives: r.undetectable_positives,
            positive_fraction: r.positive_fraction,
        })?;
    }
    w.flush()?;
    export_curves(&report.pooled, &dir, "pooled")?;
    Ok(EvaluateSummary { dir, report })
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvaluateSummary> {
    cfg.validate()?;
    evaluate_variant(cfg, cfg.variant)
}
