use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use erasure_core::image::RoiSource;
use erasure_core::inpaint::{DiffusionParams, WindowParams};
use erasure_core::synth::toy::ToyConfig;
use erasure_core::synth::{AugmentParams, CutoutFilter, PasteParams};
use erasure_net::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Pipeline variant: the full method or one of its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    /// Both network streams receive the original image.
    NoInpainting,
    /// Per-pixel L1 distance between original and inpainted RGB.
    NoDiscrepancy,
    /// Enclosed non-road components of the semantic map.
    SegmentationAlone,
    /// Trained without the additive noise augmentation.
    NoNoiseAug,
    /// Trained and run without blurring the original stream.
    NoBlur,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::NoInpainting,
        Variant::NoDiscrepancy,
        Variant::SegmentationAlone,
        Variant::NoNoiseAug,
        Variant::NoBlur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoInpainting => "no_inpainting",
            Variant::NoDiscrepancy => "no_discrepancy",
            Variant::SegmentationAlone => "segmentation_alone",
            Variant::NoNoiseAug => "no_noise_aug",
            Variant::NoBlur => "no_blur",
        }
    }

    /// Scores come from a trained network.
    pub fn needs_checkpoint(self) -> bool {
        !matches!(self, Variant::NoDiscrepancy | Variant::SegmentationAlone)
    }

    pub fn needs_inpainting(self) -> bool {
        matches!(self, Variant::Full | Variant::NoDiscrepancy | Variant::NoNoiseAug | Variant::NoBlur)
    }

    pub fn blurs_original(self) -> bool {
        self != Variant::NoBlur
    }

    /// Augmentation used while training this variant.
    pub fn train_augment(self, base: &AugmentParams) -> AugmentParams {
        AugmentParams {
            blur: base.blur && self != Variant::NoBlur,
            noise: base.noise && self != Variant::NoNoiseAug,
            ..*base
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
            format!("unknown variant {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Training set written by `generate-data` and read by `train`.
    pub dataset: PathBuf,
    /// Labeled source frames for `generate-data` with `data.source = "labeled"`.
    pub source: PathBuf,
    /// Evaluation frames: a directory holding `frames.json`.
    pub frames: PathBuf,
    /// Training runs, one subdirectory per variant.
    pub runs: PathBuf,
    /// Heatmaps, reports and ablation tables.
    pub output: PathBuf,
    /// Checkpoint used by `infer`; defaults to `<runs>/<variant>/checkpoint.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint whose backbone initializes training when
    /// `model.pretrained_backbone` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backbone: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "data/train".into(),
            source: "data/source".into(),
            frames: "data/eval".into(),
            runs: "runs".into(),
            output: "out".into(),
            checkpoint: None,
            backbone: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Procedural toy roads.
    #[default]
    Toy,
    /// Images with semantic (and optionally instance) maps under `paths.source`.
    Labeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Toy training frames.
    pub train_frames: usize,
    /// Validation frames: extra toy frames, or the last frames (by id) of a
    /// labeled source.
    pub val_frames: usize,
    /// Toy evaluation frames written to `paths.frames`.
    pub test_frames: usize,
    pub toy: ToyConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Toy,
            train_frames: 64,
            val_frames: 8,
            test_frames: 16,
            toy: ToyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RoiConfig {
    /// `ground_truth` reads each frame's ROI mask; `predicted` derives it
    /// from the frame's semantic map.
    pub source: RoiSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InpainterKind {
    /// Diffusion fill.
    #[default]
    Baseline,
    /// A local program; see [`InpainterConfig::command`].
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpainterConfig {
    pub kind: InpainterKind,
    /// Program and arguments of the external inpainter. `{context}`,
    /// `{mask}` and `{output}` are replaced by PNG paths.
    pub command: Vec<String>,
    pub windows: WindowParams,
    pub diffusion: DiffusionParams,
}

impl Default for InpainterConfig {
    fn default() -> Self {
        Self {
            kind: InpainterKind::Baseline,
            command: Vec::new(),
            windows: WindowParams::default(),
            diffusion: DiffusionParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub seed: u64,
    pub variant: Variant,
    pub paths: Paths,
    pub data: DataConfig,
    pub roi: RoiConfig,
    pub inpainter: InpainterConfig,
    pub augment: AugmentParams,
    pub cutouts: CutoutFilter,
    pub paste: PasteParams,
    pub model: ModelConfig,
    /// Its `seed` is replaced by the top-level seed.
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            variant: Variant::Full,
            paths: Paths::default(),
            data: DataConfig::default(),
            roi: RoiConfig::default(),
            inpainter: InpainterConfig::default(),
            augment: AugmentParams::default(),
            cutouts: CutoutFilter::default(),
            paste: PasteParams::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Settings sized for 256×128 toy frames on a CPU: 48 px patches, whole
    /// frames as crops, ten epochs of one-frame batches, and cutout limits that admit the toy
    /// sprites.
    pub fn toy() -> Self {
        let toy = ToyConfig::default();
        Self {
            inpainter: InpainterConfig {
                windows: WindowParams::with_patch_side(48),
                ..InpainterConfig::default()
            },
            cutouts: CutoutFilter {
                min_extent: 6,
                max_extent: 48,
                min_area: 30,
                max_area: 1500,
            },
            train: TrainConfig {
                epochs: 10,
                learning_rate: 1e-3,
                crop: (toy.width, toy.height),
                batch_size: 1,
                ..TrainConfig::default()
            },
            data: DataConfig {
                toy,
                ..DataConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    /// SHA-256 of the serialized configuration, hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Training configuration with the top-level seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Checkpoint consumed by `infer` for `variant`.
    pub fn checkpoint_path(&self, variant: Variant) -> PathBuf {
        match &self.paths.checkpoint {
            Some(p) if variant == self.variant => p.clone(),
            _ => self.run_dir(variant).join("checkpoint.json"),
        }
    }

    pub fn run_dir(&self, variant: Variant) -> PathBuf {
        self.paths.runs.join(variant.name())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        self.inpainter.windows.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.inpainter.kind == InpainterKind::External && self.inpainter.command.is_empty() {
            return bad("inpainter.kind = \"external\" needs inpainter.command".into());
        }
        if self.inpainter.kind == InpainterKind::External {
            let joined = self.inpainter.command.join(" ");
            for placeholder in ["{context}", "{mask}", "{output}"] {
                if !joined.contains(placeholder) {
                    return bad(format!("inpainter.command must mention {placeholder}"));
                }
            }
        }
        let a = &self.augment;
        if !(a.blur_sigma >= 0.0 && a.fine_amplitude >= 0.0 && a.coarse_amplitude >= 0.0) || a.coarse_cell == 0 {
            return bad("augment: sigma and amplitudes must be nonnegative and coarse_cell positive".into());
        }
        let c = &self.cutouts;
        if c.min_extent > c.max_extent || c.min_area > c.max_area {
            return bad("cutouts: lower bounds exceed upper bounds".into());
        }
        let p = &self.paste;
        if p.min_count > p.max_count || p.max_attempts == 0 || !(0.0..=1.0).contains(&p.mirror_probability) {
            return bad("paste: need min_count <= max_count, max_attempts > 0, mirror_probability in [0, 1]".into());
        }
        let t = &self.data.toy;
        if self.data.source == DataSource::Toy {
            if t.width < 16 || t.height < 16 {
                return bad("data.toy: frames must be at least 16x16".into());
            }
            if t.min_obstacle_side == 0
                || t.min_obstacle_side > t.max_obstacle_side
                || t.max_obstacle_side >= t.width.min(t.height) / 2
            {
                return bad("data.toy: obstacle side range must be nonempty and fit the road".into());
            }
            if self.data.train_frames == 0 {
                return bad("data.train_frames must be positive".into());
            }
        }
        if self.model.pretrained_backbone && self.paths.backbone.is_none() {
            return bad("model.pretrained_backbone needs paths.backbone".into());
        }
        erasure_net::DiscrepancyNet::new(self.model.clone(), 0).map_err(|e| PipelineError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_toy_validate() {
        PipelineConfig::default().validate().unwrap();
        PipelineConfig::toy().validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        for cfg in [PipelineConfig::default(), PipelineConfig::toy()] {
            assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
        let mut cfg = PipelineConfig::toy();
        cfg.paths.checkpoint = Some("x/best.json".into());
        cfg.variant = Variant::NoBlur;
        cfg.inpainter.kind = InpainterKind::External;
        cfg.inpainter.command = vec!["fill".into(), "{context}".into(), "{mask}".into(), "{output}".into()];
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let cfg = PipelineConfig::from_toml("version = 1\nseed = 9\n[train]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.learning_rate, 1e-4);
        assert_eq!(cfg.inpainter.windows.patch_side, 200);
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            "version = 2",
            "version = 1\nunknown = 3",
            "version = 1\nvariant = \"resynthesis\"",
            "version = 1\n[inpainter]\nkind = \"external\"",
            "version = 1\n[inpainter.windows]\noverlap = 1.0",
            "version = 1\n[model]\nfusion_channels = [8, 16]",
            "version = 1\n[train]\nplateau_factor = 1.5",
        ] {
            let err = PipelineConfig::from_toml(text).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::toy();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn variant_names_parse_back() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
        assert!(!Variant::NoDiscrepancy.needs_checkpoint());
        assert!(Variant::NoInpainting.needs_checkpoint());
        assert!(!Variant::NoInpainting.needs_inpainting());
    }

    #[test]
    fn checkpoint_path_defaults_per_variant() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(cfg.checkpoint_path(Variant::NoBlur), Path::new("runs/no_blur/checkpoint.json"));
        cfg.paths.checkpoint = Some("best.json".into());
        assert_eq!(cfg.checkpoint_path(Variant::Full), Path::new("best.json"));
        assert_eq!(cfg.checkpoint_path(Variant::NoBlur), Path::new("runs/no_blur/checkpoint.json"));
    }
}
