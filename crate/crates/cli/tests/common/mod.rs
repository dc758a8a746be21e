#![allow(dead_code)]

use std::path::{Path, PathBuf};

use erasure_cli::PipelineConfig;
use erasure_core::inpaint::WindowParams;
use erasure_core::synth::toy::ToyConfig;
use erasure_core::synth::CutoutFilter;
use erasure_net::{ModelConfig, TrainConfig};
use sha2::{Digest, Sha256};

/// A pipeline small enough to run end to end in a few seconds: 64×32
/// frames, a three-level network and two epochs.
pub fn small_config(root: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::toy();
    cfg.seed = 11;
    cfg.paths.dataset = root.join("data/train");
    cfg.paths.frames = root.join("data/eval");
    cfg.paths.runs = root.join("runs");
    cfg.paths.output = root.join("out");
    cfg.data.train_frames = 6;
    cfg.data.val_frames = 2;
    cfg.data.test_frames = 3;
    cfg.data.toy = ToyConfig {
        width: 64,
        height: 32,
        min_obstacles: 1,
        max_obstacles: 2,
        min_obstacle_side: 4,
        max_obstacle_side: 10,
        ..ToyConfig::default()
    };
    cfg.inpainter.windows = WindowParams::with_patch_side(16);
    cfg.cutouts = CutoutFilter {
        min_extent: 2,
        max_extent: 30,
        min_area: 4,
        max_area: 600,
    };
    cfg.model = ModelConfig {
        backbone_channels: vec![6, 8, 12],
        convs_per_level: vec![1, 1, 1],
        fusion_channels: vec![4, 6, 8],
        decoder_channels: vec![6, 8],
        head_channels: 6,
        pretrained_backbone: false,
    };
    cfg.train = TrainConfig {
        epochs: 2,
        learning_rate: 1e-3,
        crop: (64, 32),
        batch_size: 2,
        ..TrainConfig::default()
    };
    cfg
}

/// SHA-256 of every file under `dir`, keyed by relative path.
pub fn tree_hashes(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), hex));
            }
        }
    }
    out.sort();
    out
}
