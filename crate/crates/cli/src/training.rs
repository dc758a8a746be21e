//! `train`: fit the discrepancy network of a variant on a generated
//! training set.

use std::path::PathBuf;

use erasure_core::synth::{augment_high_freq, build_epoch_plan, AugmentParams, FrameInfo, ScheduleEntry};
use erasure_core::{LabelMask, Plane, Rect, RgbImage};
use erasure_net::{load_backbone, train, Checkpoint, DiscrepancyNet, HistoryRow, NetError, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{PipelineConfig, Variant};
use crate::dataset::{derive_seed, DatasetLayout, DatasetManifest, RunManifest, SampleRecord};
use crate::error::{PipelineError, Result};
use crate::io::{read_labels, read_mask, read_rgb};

const STREAM_VAL_CROPS: u64 = 6;

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub history: Vec<HistoryRow>,
    pub best_epoch: usize,
    pub best_loss: f64,
}

fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// `crop`-sized window at `origin`; image pixels beyond the frame are
/// mirrored, masks are padded with `fill`.
fn crop_rgb(img: &RgbImage, origin: (usize, usize), crop: (usize, usize)) -> RgbImage {
    let (w, h) = img.dims();
    if origin.0 + crop.0 <= w && origin.1 + crop.1 <= h {
        return img.crop(Rect::new(origin.0, origin.1, crop.0, crop.1));
    }
    RgbImage::from_fn(crop.0, crop.1, |x, y| {
        img.get(reflect((origin.0 + x) as isize, w), reflect((origin.1 + y) as isize, h))
    })
}

fn crop_plane<T: Clone>(p: &Plane<T>, origin: (usize, usize), crop: (usize, usize), fill: T) -> Plane<T> {
    let (w, h) = p.dims();
    Plane::from_fn(crop.0, crop.1, |x, y| {
        let (sx, sy) = (origin.0 + x, origin.1 + y);
        if sx < w && sy < h {
            p.get(sx, sy).clone()
        } else {
            fill.clone()
        }
    })
}

/// Load, crop and augment one schedule entry for `variant`. The noise
/// draws come from the entry seed.
pub fn load_sample(
    layout: &DatasetLayout,
    entry: &ScheduleEntry,
    crop: (usize, usize),
    augment: &AugmentParams,
    variant: Variant,
) -> erasure_net::Result<Sample> {
    let id = &entry.frame_id;
    let data = |e: PipelineError| NetError::Data {
        id: id.clone(),
        message: e.to_string(),
    };
    let image = read_rgb(&layout.image(id)).map_err(data)?;
    let inpainted = read_rgb(&layout.inpainted(id)).map_err(data)?;
    let labels = read_labels(&layout.mask(id)).map_err(data)?;
    let roi = read_mask(&layout.roi(id)).map_err(data)?;
    let o = entry.crop_origin;
    let original = crop_rgb(&image, o, crop);
    let mut rng = ChaCha8Rng::seed_from_u64(entry.seed);
    let original = augment_high_freq(&original, &mut rng, &variant.train_augment(augment));
    let inpainted = if variant == Variant::NoInpainting {
        original.clone()
    } else {
        crop_rgb(&inpainted, o, crop)
    };
    let sample = Sample {
        id: id.clone(),
        original,
        inpainted,
        labels: crop_plane(&labels, o, crop, LabelMask::IGNORE),
        roi: crop_plane(&roi, o, crop, false),
    };
    sample.check()?;
    Ok(sample)
}

/// Validation crops: one ROI-guided crop per frame, blurred but without
/// noise.
fn validation_samples(
    layout: &DatasetLayout,
    records: &[SampleRecord],
    cfg: &PipelineConfig,
    variant: Variant,
) -> Result<Vec<Sample>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let infos: Result<Vec<FrameInfo>> = records
        .iter()
        .map(|r| {
            Ok(FrameInfo {
                id: r.id.clone(),
                width: r.width,
                height: r.height,
                roi_bbox: read_mask(&layout.roi(&r.id))?.bbox(),
            })
        })
        .collect();
    let plan = build_epoch_plan(&infos?, cfg.train.crop, 1, derive_seed(cfg.seed, STREAM_VAL_CROPS, 0));
    let augment = AugmentParams {
        noise: false,
        ..cfg.augment
    };
    let mut entries = plan.epochs.into_iter().next().unwrap_or_default();
    entries.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    entries
        .iter()
        .map(|e| Ok(load_sample(layout, e, cfg.train.crop, &augment, variant)?))
        .collect()
}

#[derive(Serialize)]
struct HistoryCsvRow {
    epoch: usize,
    train_loss: f64,
    val_loss: Option<f64>,
    lr: f64,
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let variant = cfg.variant;
    if !variant.needs_checkpoint() {
        return Err(PipelineError::Config(format!("variant {variant} has no network to train")));
    }
    let layout = DatasetLayout::new(&cfg.paths.dataset);
    let manifest = DatasetManifest::load(&layout)?;
    let tcfg = cfg.train_config();
    if manifest.plan.crop != tcfg.crop {
        return Err(PipelineError::Config(format!(
            "train.crop {:?} differs from the dataset schedule crop {:?}; regenerate the data",
            tcfg.crop, manifest.plan.crop
        )));
    }
    if tcfg.epochs > manifest.plan.epochs.len() {
        log::warn!(
            "the schedule has {} epochs; training for {} repeats it",
            manifest.plan.epochs.len(),
            tcfg.epochs
        );
    }
    let mut model = DiscrepancyNet::new(cfg.model.clone(), cfg.seed)?;
    if cfg.model.pretrained_backbone {
        let path = cfg.paths.backbone.as_ref().expect("validated");
        let n = load_backbone(&mut model, &Checkpoint::load(path)?)?;
        log::info!("initialized {n} backbone tensors from {}", path.display());
    }
    let val = validation_samples(&layout, &manifest.val, cfg, variant)?;
    let run_dir = cfg.run_dir(variant);
    std::fs::create_dir_all(&run_dir)?;
    let checkpoint = run_dir.join("checkpoint.json");
    let augment = cfg.augment;
    let outcome = train(
        &mut model,
        &manifest.plan,
        |e| load_sample(&layout, e, tcfg.crop, &augment, variant),
        &val,
        &tcfg,
        Some(&checkpoint),
    )?;

    let mut w = csv::Writer::from_path(run_dir.join("history.csv"))?;
    for r in &outcome.history {
        w.serialize(HistoryCsvRow {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
            lr: r.lr,
        })?;
    }
    w.flush()?;
    RunManifest::new("train", Some(variant), cfg).write(&run_dir)?;
    Ok(TrainSummary {
        run_dir,
        checkpoint,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        best_loss: outcome.best_loss,
    })
}
