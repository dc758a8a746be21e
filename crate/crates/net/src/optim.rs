use serde::{Deserialize, Serialize};

use crate::model::DiscrepancyNet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    t: i32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(model: &DiscrepancyNet, params: AdamParams) -> Self {
        let zeros: Vec<Vec<f32>> = model.tensors().iter().map(|t| vec![0.0; t.2.len()]).collect();
        Self {
            params,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Apply one update with gradient `grads * grad_scale`.
    pub fn step(&mut self, model: &mut DiscrepancyNet, grads: &DiscrepancyNet, lr: f32, grad_scale: f32) {
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in model
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                let gi = g.2[i] * grad_scale;
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

/// Multiply the learning rate by `factor` once the monitored loss has not
/// improved for `patience` consecutive epochs; the count then restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    best: Option<f64>,
    stale_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        Self {
            lr,
            factor,
            patience,
            best: None,
            stale_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Record the loss of a finished epoch. Returns true when this call
    /// reduced the learning rate (effective from the next epoch).
    pub fn step(&mut self, loss: f64) -> bool {
        if self.best.is_none_or(|b| loss < b) {
            self.best = Some(loss);
            self.stale_epochs = 0;
            return false;
        }
        self.stale_epochs += 1;
        if self.stale_epochs >= self.patience {
            self.lr *= self.factor;
            self.stale_epochs = 0;
            return true;
        }
        false
    }
}
