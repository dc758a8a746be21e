use std::path::Path;

use erasure_core::synth::{EpochPlan, ScheduleEntry};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{NetError, Result};
use crate::model::{DiscrepancyNet, Sample};
use crate::optim::{Adam, AdamParams, PlateauScheduler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    /// Loss weight of obstacle pixels relative to background pixels.
    pub pos_weight: f64,
    /// Crop width and height.
    pub crop: (usize, usize),
    pub batch_size: usize,
    /// Mirror samples whose schedule seed is odd.
    pub hflip: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 65,
            learning_rate: 1e-4,
            plateau_patience: 5,
            plateau_factor: 0.1,
            pos_weight: 20.0,
            crop: (768, 384),
            batch_size: 4,
            hflip: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NetError::TrainConfig(m));
        if self.epochs == 0 || self.batch_size == 0 || self.plateau_patience == 0 {
            return bad("epochs, batch_size and plateau_patience must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau_factor must be in (0, 1), got {}", self.plateau_factor));
        }
        if !(self.pos_weight > 0.0 && self.pos_weight.is_finite()) {
            return bad(format!("pos_weight must be positive, got {}", self.pos_weight));
        }
        if self.crop.0 == 0 || self.crop.1 == 0 {
            return bad("crop must be nonempty".into());
        }
        Ok(())
    }
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<HistoryRow>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub best: Checkpoint,
}

/// Mean loss over `samples`, skipping those without valid pixels.
pub fn mean_loss(model: &DiscrepancyNet, samples: &[Sample], pos_weight: f64) -> Result<Option<f64>> {
    let losses: Vec<_> = samples
        .par_iter()
        .map(|s| model.loss_and_grad(s, pos_weight, false).map(|(b, _)| b))
        .collect::<Result<_>>()?;
    let valid: Vec<f64> = losses.iter().filter(|b| b.has_valid_pixels()).map(|b| b.loss).collect();
    Ok((!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64))
}

/// Train `model` following `plan`, one schedule epoch per training epoch.
///
/// `load` turns a schedule entry into a sample (already cropped). Each
/// batch averages per-sample gradients in schedule order. The learning
/// rate follows a plateau schedule on the validation loss (training loss
/// when `val` is empty); the best model so far is written to `checkpoint`
/// when given.
pub fn train<L>(
    model: &mut DiscrepancyNet,
    plan: &EpochPlan,
    load: L,
    val: &[Sample],
    cfg: &TrainConfig,
    checkpoint: Option<&Path>,
) -> Result<TrainOutcome>
where
    L: Fn(&ScheduleEntry) -> Result<Sample> + Sync,
{
    cfg.validate()?;
    if plan.epochs.is_empty() || plan.epochs.iter().all(Vec::is_empty) {
        return Err(NetError::TrainConfig("empty training schedule".into()));
    }
    let mut adam = Adam::new(model, AdamParams::default());
    let mut scheduler = PlateauScheduler::new(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Checkpoint)> = None;

    for epoch in 1..=cfg.epochs {
        let entries = &plan.epochs[(epoch - 1) % plan.epochs.len()];
        let lr = scheduler.lr();
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (batch, chunk) in entries.chunks(cfg.batch_size).enumerate() {
            let outputs: Vec<_> = chunk
                .par_iter()
                .map(|entry| {
                    let sample = load(entry)?;
                    let sample = if cfg.hflip && entry.seed & 1 == 1 { sample.mirrored() } else { sample };
                    model.loss_and_grad(&sample, cfg.pos_weight, true)
                })
                .collect::<Result<_>>()?;
            let mut acc = model.zeros_like();
            let mut used = 0usize;
            for (bce, grads) in outputs {
                if !bce.loss.is_finite() {
                    return Err(NetError::NonFinite { epoch, batch });
                }
                if !bce.has_valid_pixels() {
                    continue;
                }
                acc.add_scaled(&grads.expect("gradients requested"), 1.0);
                loss_sum += bce.loss;
                loss_count += 1;
                used += 1;
            }
            if used == 0 {
                continue;
            }
            if acc.tensors().iter().any(|t| t.2.iter().any(|g| !g.is_finite())) {
                return Err(NetError::NonFinite { epoch, batch });
            }
            adam.step(model, &acc, lr as f32, 1.0 / used as f32);
        }
        let train_loss = if loss_count == 0 { 0.0 } else { loss_sum / loss_count as f64 };
        let val_loss = if val.is_empty() { None } else { mean_loss(model, val, cfg.pos_weight)? };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() {
            return Err(NetError::NonFinite { epoch, batch: 0 });
        }
        log::info!(
            "epoch {epoch}/{}: train loss {train_loss:.5}, val loss {}, lr {lr:e}",
            cfg.epochs,
            val_loss.map_or("-".to_string(), |v| format!("{v:.5}"))
        );
        if best.as_ref().is_none_or(|b| monitored < b.1) {
            let ckpt = Checkpoint::new(model, cfg, epoch, Some(monitored));
            if let Some(path) = checkpoint {
                ckpt.save(path)?;
            }
            best = Some((epoch, monitored, ckpt));
        }
        history.push(HistoryRow {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        if scheduler.step(monitored) {
            log::info!("learning rate reduced to {:e}", scheduler.lr());
        }
    }
    let (best_epoch, best_loss, best) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_loss,
        best,
    })
}
