use erasure_core::image::check_dims_pair;
use erasure_core::{LabelMask, Plane};

use crate::error::{NetError, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct BceOutput {
    /// `sum(w * l) / sum(w)` over valid pixels; 0 when there are none.
    pub loss: f64,
    /// Per-pixel derivative of `loss`, raster order, 0 on excluded pixels.
    pub grad: Vec<f64>,
    pub valid_pixels: usize,
    pub weight_sum: f64,
}

impl BceOutput {
    pub fn has_valid_pixels(&self) -> bool {
        self.valid_pixels > 0
    }
}

/// Target per pixel: `Some(is_obstacle)` for pixels inside the ROI with a
/// 0/1 label, `None` for ignored pixels.
fn targets(labels: &LabelMask, roi: &Plane<bool>) -> Result<Vec<Option<bool>>> {
    check_dims_pair(labels.dims(), roi.dims(), "roi")?;
    labels
        .as_slice()
        .iter()
        .zip(roi.as_slice())
        .map(|(&l, &r)| match (r, l) {
            (false, _) | (_, LabelMask::IGNORE) => Ok(None),
            (true, LabelMask::BACKGROUND) => Ok(Some(false)),
            (true, LabelMask::OBSTACLE) => Ok(Some(true)),
            (true, other) => Err(NetError::Data {
                id: String::new(),
                message: format!("label value {other} is not 0, 1 or 255"),
            }),
        })
        .collect()
}

fn check_pos_weight(pos_weight: f64) -> Result<()> {
    if !(pos_weight.is_finite() && pos_weight > 0.0) {
        return Err(NetError::TrainConfig(format!("pos_weight must be positive, got {pos_weight}")));
    }
    Ok(())
}

/// Class-weighted binary cross-entropy of obstacle probabilities:
/// `-[pos_weight * y * ln p + (1 - y) * ln(1 - p)]`, averaged with the
/// per-pixel weights (`pos_weight` for obstacles, 1 otherwise). The
/// gradient is with respect to `p`.
pub fn weighted_bce(pred: &Plane<f32>, labels: &LabelMask, roi: &Plane<bool>, pos_weight: f64) -> Result<BceOutput> {
    check_pos_weight(pos_weight)?;
    check_dims_pair(labels.dims(), pred.dims(), "prediction")?;
    let t = targets(labels, roi)?;
    let weight_sum: f64 = t.iter().flatten().map(|&y| if y { pos_weight } else { 1.0 }).sum();
    let valid_pixels = t.iter().flatten().count();
    let mut grad = vec![0.0; t.len()];
    if valid_pixels == 0 {
        return Ok(BceOutput {
            loss: 0.0,
            grad,
            valid_pixels,
            weight_sum,
        });
    }
    let mut total = 0.0;
    for (i, (target, &p)) in t.iter().zip(pred.as_slice()).enumerate() {
        let Some(y) = *target else { continue };
        let raw = p as f64;
        let p = raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
        let clamped = p != raw;
        if y {
            total += -pos_weight * p.ln();
            grad[i] = if clamped { 0.0 } else { -pos_weight / p / weight_sum };
        } else {
            total += -(1.0 - p).ln();
            grad[i] = if clamped { 0.0 } else { 1.0 / (1.0 - p) / weight_sum };
        }
    }
    Ok(BceOutput {
        loss: total / weight_sum,
        grad,
        valid_pixels,
        weight_sum,
    })
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// [`weighted_bce`] of `p = sigmoid(z)`, evaluated without forming `p` and
/// differentiated with respect to the logit difference `z`.
pub fn weighted_bce_logits(z: &Plane<f32>, labels: &LabelMask, roi: &Plane<bool>, pos_weight: f64) -> Result<BceOutput> {
    check_pos_weight(pos_weight)?;
    check_dims_pair(labels.dims(), z.dims(), "logits")?;
    let t = targets(labels, roi)?;
    let weight_sum: f64 = t.iter().flatten().map(|&y| if y { pos_weight } else { 1.0 }).sum();
    let valid_pixels = t.iter().flatten().count();
    let mut grad = vec![0.0; t.len()];
    if valid_pixels == 0 {
        return Ok(BceOutput {
            loss: 0.0,
            grad,
            valid_pixels,
            weight_sum,
        });
    }
    let (lo, hi) = (-(1.0 - PROB_EPS).ln(), -PROB_EPS.ln());
    let mut total = 0.0;
    for (i, (target, &zi)) in t.iter().zip(z.as_slice()).enumerate() {
        let Some(y) = *target else { continue };
        let z = zi as f64;
        // -ln p = softplus(-z), -ln(1 - p) = softplus(z).
        let raw = if y { softplus(-z) } else { softplus(z) };
        let l = raw.clamp(lo, hi);
        let w = if y { pos_weight } else { 1.0 };
        total += w * l;
        if l == raw {
            let p = 1.0 / (1.0 + (-z).exp());
            grad[i] = w * (p - if y { 1.0 } else { 0.0 }) / weight_sum;
        }
    }
    Ok(BceOutput {
        loss: total / weight_sum,
        grad,
        valid_pixels,
        weight_sum,
    })
}
