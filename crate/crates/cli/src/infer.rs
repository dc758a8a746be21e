//! `infer`: heatmaps for the evaluation frames.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use erasure_core::image::RoiSource;
use erasure_core::Heatmap;
use erasure_net::{Checkpoint, DiscrepancyNet};
use rayon::prelude::*;

use crate::config::{PipelineConfig, Variant};
use crate::dataset::{Frames, Require, RunManifest};
use crate::detect::{build_inpainter, inpaint_input, load_frame_input, score};
use crate::error::{PipelineError, Result};
use crate::io::{write_heatmap, write_json, write_mask, HeatmapFiles, HeatmapInfo};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct InferSummary {
    pub frames: usize,
    /// Heatmap directory per variant.
    pub dirs: Vec<(Variant, PathBuf)>,
    pub failed: Vec<FrameFailure>,
}

pub fn variant_dir(cfg: &PipelineConfig, variant: Variant) -> PathBuf {
    cfg.paths.output.join(variant.name())
}

pub fn heatmap_dir(cfg: &PipelineConfig, variant: Variant) -> PathBuf {
    variant_dir(cfg, variant).join("heatmaps")
}

/// Check, before any work, that every variant can run on `frames`.
pub fn check_variants(cfg: &PipelineConfig, frames: &Frames, variants: &[Variant]) -> Result<()> {
    let semantics = frames.has_semantics();
    if cfg.roi.source == RoiSource::Predicted && !semantics {
        return Err(PipelineError::Config(
            "roi.source = \"predicted\" needs a vocabulary and a semantic map for every frame".into(),
        ));
    }
    for &v in variants {
        if v == Variant::SegmentationAlone && !semantics {
            return Err(PipelineError::Config(format!(
                "variant {v} needs a vocabulary and a semantic map for every frame"
            )));
        }
        if v.needs_checkpoint() && !cfg.checkpoint_path(v).exists() {
            return Err(PipelineError::Config(format!(
                "variant {v}: no checkpoint at {}; run `erasure train --variant {v}` first",
                cfg.checkpoint_path(v).display()
            )));
        }
    }
    Ok(())
}

fn load_models(cfg: &PipelineConfig, variants: &[Variant]) -> Result<BTreeMap<Variant, DiscrepancyNet>> {
    variants
        .iter()
        .filter(|v| v.needs_checkpoint())
        .map(|&v| {
            let path = cfg.checkpoint_path(v);
            let model = Checkpoint::load(&path)
                .and_then(|c| c.to_model())
                .map_err(|e| PipelineError::input(&path, e.to_string()))?;
            Ok((v, model))
        })
        .collect()
}

/// Run detection for several variants at once; each frame is inpainted a
/// single time. Heatmap directories are recreated. Frames that fail are
/// logged and reported, the others are written.
pub fn infer_variants(cfg: &PipelineConfig, variants: &[Variant]) -> Result<InferSummary> {
    cfg.validate()?;
    let frames = Frames::load(
        &cfg.paths.frames,
        Require {
            labels: false,
            roi: cfg.roi.source == RoiSource::GroundTruth,
        },
    )?;
    check_variants(cfg, &frames, variants)?;
    let models = load_models(cfg, variants)?;
    let dirs: Vec<(Variant, PathBuf)> = variants.iter().map(|&v| (v, heatmap_dir(cfg, v))).collect();
    for (_, d) in &dirs {
        if d.exists() {
            std::fs::remove_dir_all(d)?;
        }
        std::fs::create_dir_all(d)?;
    }
    let inpainter = build_inpainter(cfg);
    let vocab = frames.vocabulary.as_ref();

    let failed: Vec<FrameFailure> = frames
        .frames
        .par_iter()
        .filter_map(|rec| {
            let run = || -> Result<()> {
                let input = load_frame_input(rec, cfg.roi.source, vocab)?;
                let inpainted = inpaint_input(&input, variants, inpainter.as_ref(), cfg)?;
                let heats: Vec<Heatmap> = variants
                    .iter()
                    .map(|&v| score(&input, inpainted.as_ref(), v, models.get(&v), vocab, cfg))
                    .collect::<Result<_>>()?;
                for ((v, dir), heat) in dirs.iter().zip(&heats) {
                    write_outputs(dir, &rec.id, *v, heat, &input.roi, cfg.roi.source)?;
                }
                Ok(())
            };
            run().err().map(|e| {
                log::error!("frame {}: {e}", rec.id);
                for (_, dir) in &dirs {
                    let files = HeatmapFiles::new(dir, &rec.id);
                    for p in [files.heatmap, files.sidecar, files.roi] {
                        let _ = std::fs::remove_file(p);
                    }
                }
                FrameFailure {
                    id: rec.id.clone(),
                    error: e.to_string(),
                }
            })
        })
        .collect();

    for &v in variants {
        RunManifest::new("infer", Some(v), cfg).write(&variant_dir(cfg, v))?;
    }
    Ok(InferSummary {
        frames: frames.frames.len(),
        dirs,
        failed,
    })
}

fn write_outputs(
    dir: &Path,
    id: &str,
    variant: Variant,
    heat: &Heatmap,
    roi: &erasure_core::RoiMask,
    source: RoiSource,
) -> Result<()> {
    let files = HeatmapFiles::new(dir, id);
    write_heatmap(&files.heatmap, heat)?;
    if source == RoiSource::Predicted {
        write_mask(&files.roi, &roi.mask)?;
    }
    write_json(
        &files.sidecar,
        &HeatmapInfo {
            frame_id: id.to_string(),
            roi_source: source,
            variant,
            width: heat.width(),
            height: heat.height(),
        },
    )
}

pub fn cmd_infer(cfg: &PipelineConfig) -> Result<InferSummary> {
    infer_variants(cfg, &[cfg.variant])
}
