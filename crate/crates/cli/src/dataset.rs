//! On-disk layouts: generated training sets, evaluation frame lists and
//! run manifests.

use std::path::{Path, PathBuf};

use erasure_core::drivable::ClassVocabulary;
use erasure_core::synth::{EpochPlan, ExtractionReport};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, PipelineConfig, Variant};
use crate::error::{PipelineError, Result};
use crate::io::{read_json, write_json};

pub const DATASET_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.json";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

/// Seed of item `index` in an independent `stream`, derived from the base
/// seed with the SplitMix64 finalizer.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(0x94d0_49bb_1331_11eb);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Directory tree of a generated training set.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub const SUBDIRS: [&'static str; 4] = ["images", "inpainted", "masks", "roi"];

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn file(&self, dir: &str, id: &str) -> PathBuf {
        self.root.join(dir).join(format!("{id}.png"))
    }

    /// Frame with pasted obstacles, before augmentation.
    pub fn image(&self, id: &str) -> PathBuf {
        self.file("images", id)
    }

    pub fn inpainted(&self, id: &str) -> PathBuf {
        self.file("inpainted", id)
    }

    pub fn mask(&self, id: &str) -> PathBuf {
        self.file("masks", id)
    }

    pub fn roi(&self, id: &str) -> PathBuf {
        self.file("roi", id)
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn create(&self) -> Result<()> {
        for d in Self::SUBDIRS {
            std::fs::create_dir_all(self.root.join(d))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    /// Seed of the obstacle placement (and of the scene, for toy data).
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub obstacles: usize,
    /// Fewer obstacles than requested could be placed.
    pub shortfall: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub source: DataSource,
    pub seed: u64,
    pub config_sha256: String,
    pub code_version: String,
    pub cutouts: usize,
    pub extraction: ExtractionReport,
    pub train: Vec<SampleRecord>,
    pub val: Vec<SampleRecord>,
    /// Crop schedule of the training frames.
    pub plan: EpochPlan,
}

impl DatasetManifest {
    pub fn load(layout: &DatasetLayout) -> Result<Self> {
        let m: DatasetManifest = read_json(&layout.manifest())?;
        if m.format_version != DATASET_FORMAT {
            return Err(PipelineError::input(
                layout.manifest(),
                format!("dataset format {} is not supported", m.format_version),
            ));
        }
        Ok(m)
    }
}

/// One evaluation frame. Paths are relative to the directory of the frame
/// list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub id: String,
    pub image: PathBuf,
    pub labels: PathBuf,
    pub roi: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego: Option<PathBuf>,
}

/// Contents of `frames.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameList {
    /// Class vocabulary of the semantic maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<PathBuf>,
    pub frames: Vec<FrameRecord>,
}

/// Which optional per-frame files [`Frames::load`] insists on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Require {
    pub labels: bool,
    pub roi: bool,
}

impl Require {
    pub const ALL: Require = Require { labels: true, roi: true };
}

/// A frame list with its paths made absolute (relative to its directory).
#[derive(Debug, Clone)]
pub struct Frames {
    pub dir: PathBuf,
    pub vocabulary: Option<ClassVocabulary>,
    pub frames: Vec<FrameRecord>,
}

impl Frames {
    /// Read `<dir>/frames.json` and check that the referenced files exist.
    /// Label and ROI files are only checked when `require` asks for them.
    pub fn load(dir: &Path, require: Require) -> Result<Self> {
        let list: FrameList = read_json(&dir.join(FRAMES_FILE))?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
        let mut missing = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        let mut frames = Vec::with_capacity(list.frames.len());
        for f in &list.frames {
            if !seen.insert(f.id.clone()) {
                return Err(PipelineError::input(dir.join(FRAMES_FILE), format!("duplicate frame id {}", f.id)));
            }
            if f.id.is_empty() || f.id.contains(['/', '\\']) {
                return Err(PipelineError::input(dir.join(FRAMES_FILE), format!("invalid frame id {:?}", f.id)));
            }
            let r = FrameRecord {
                id: f.id.clone(),
                image: resolve(&f.image),
                labels: resolve(&f.labels),
                roi: resolve(&f.roi),
                semantic: f.semantic.as_deref().map(resolve),
                ego: f.ego.as_deref().map(resolve),
            };
            let labels = require.labels.then_some(&r.labels);
            let roi = require.roi.then_some(&r.roi);
            for p in [Some(&r.image), labels, roi, r.semantic.as_ref(), r.ego.as_ref()]
                .into_iter()
                .flatten()
            {
                if !p.exists() {
                    missing.push(p.clone());
                }
            }
            frames.push(r);
        }
        let vocabulary = match &list.vocabulary {
            Some(v) => {
                let p = resolve(v);
                if p.exists() {
                    Some(read_json::<ClassVocabulary>(&p)?)
                } else {
                    missing.push(p);
                    None
                }
            }
            None => None,
        };
        if !missing.is_empty() {
            return Err(PipelineError::MissingFiles(missing));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            vocabulary,
            frames,
        })
    }

    /// Semantic maps and a vocabulary are present for every frame.
    pub fn has_semantics(&self) -> bool {
        self.vocabulary.is_some() && self.frames.iter().all(|f| f.semantic.is_some())
    }
}

/// Provenance of a command's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub variant: Option<Variant>,
    pub seed: u64,
    pub config_sha256: String,
    pub code_version: String,
}

impl RunManifest {
    pub fn new(command: &str, variant: Option<Variant>, cfg: &PipelineConfig) -> Self {
        Self {
            command: command.to_string(),
            variant,
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(RUN_MANIFEST_FILE), self)
    }
}
