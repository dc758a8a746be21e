use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::{DiscrepancyNet, ModelConfig};
use crate::train::TrainConfig;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Model weights with the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub epoch: usize,
    pub loss: Option<f64>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(model: &DiscrepancyNet, train: &TrainConfig, epoch: usize, loss: Option<f64>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT,
            model: model.config.clone(),
            train: train.clone(),
            seed: train.seed,
            epoch,
            loss,
            tensors: model
                .tensors()
                .into_iter()
                .map(|(name, shape, data)| NamedTensor {
                    name,
                    shape,
                    data: data.clone(),
                })
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ckpt.format_version != CHECKPOINT_FORMAT {
            return Err(NetError::Checkpoint {
                path: path.to_path_buf(),
                message: format!("format version {} is not supported (expected {CHECKPOINT_FORMAT})", ckpt.format_version),
            });
        }
        Ok(ckpt)
    }

    /// Rebuild the network and copy every tensor in by name.
    pub fn to_model(&self) -> Result<DiscrepancyNet> {
        let mut model = DiscrepancyNet::new(self.model.clone(), 0)?;
        let copied = copy_tensors(&mut model, &self.tensors, |_| true)?;
        let expected = model.tensors().len();
        if copied != expected {
            return Err(self.mismatch(format!("{copied} of {expected} tensors present")));
        }
        Ok(model)
    }

    fn mismatch(&self, message: String) -> NetError {
        NetError::Checkpoint {
            path: Default::default(),
            message,
        }
    }
}

/// Overwrite the backbone of `model` with the `backbone.*` tensors of a
/// checkpoint. Returns the number of tensors copied.
pub fn load_backbone(model: &mut DiscrepancyNet, source: &Checkpoint) -> Result<usize> {
    let n = copy_tensors(model, &source.tensors, |name| name.starts_with("backbone."))?;
    if n == 0 {
        return Err(source.mismatch("no backbone tensors".into()));
    }
    Ok(n)
}

fn copy_tensors(model: &mut DiscrepancyNet, tensors: &[NamedTensor], keep: impl Fn(&str) -> bool) -> Result<usize> {
    let layout: Vec<(String, Vec<usize>)> = model.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
    let mut copied = 0;
    for (dst, (name, shape)) in model.tensors_mut().into_iter().zip(layout) {
        if !keep(&name) {
            continue;
        }
        let Some(src) = tensors.iter().find(|t| t.name == name) else {
            continue;
        };
        if src.shape != shape || src.data.len() != dst.len() {
            return Err(NetError::Checkpoint {
                path: Default::default(),
                message: format!("tensor {name} has shape {:?}, model expects {shape:?}", src.shape),
            });
        }
        dst.copy_from_slice(&src.data);
        copied += 1;
    }
    Ok(copied)
}
