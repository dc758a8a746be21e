//! `generate-data`: the semi-synthetic training set, and toy evaluation
//! frames.

use std::path::{Path, PathBuf};

use erasure_core::drivable::{derive_roi, ClassVocabulary, SemanticMap};
use erasure_core::image::RoiSource;
use erasure_core::inpaint::{inpaint_roi, Inpainter};
use erasure_core::synth::toy::{generate_scene, generate_test_frame, toy_vocabulary};
use erasure_core::synth::{build_epoch_plan, extract_cutouts, paste_obstacles, ExtractionReport, FrameInfo, ObjectCutout};
use erasure_core::{LabelMask, Plane, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{DataSource, PipelineConfig};
use crate::dataset::{
    derive_seed, DatasetLayout, DatasetManifest, FrameList, FrameRecord, RunManifest, SampleRecord, DATASET_FORMAT,
    FRAMES_FILE, MANIFEST_FILE, RUN_MANIFEST_FILE,
};
use crate::detect::build_inpainter;
use crate::error::{PipelineError, Result};
use crate::io::{
    read_instances, read_json, read_mask, read_rgb, read_semantic, write_json, write_labels, write_mask, write_rgb,
    write_semantic,
};

const STREAM_TRAIN_SCENE: u64 = 1;
const STREAM_VAL_SCENE: u64 = 2;
const STREAM_TEST_SCENE: u64 = 3;
const STREAM_PASTE: u64 = 4;
const STREAM_PLAN: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub dataset: PathBuf,
    pub train: usize,
    pub val: usize,
    pub cutouts: usize,
    /// Samples that received fewer obstacles than requested.
    pub shortfalls: usize,
    /// Toy evaluation frames, when written.
    pub test_frames: Option<PathBuf>,
}

/// A frame to paste obstacles onto.
struct SourceFrame {
    image: RgbImage,
    semantic: SemanticMap,
    instances: Option<Plane<u32>>,
    ego: Option<Plane<bool>>,
}

enum Source {
    Toy { train_seeds: Vec<u64>, val_seeds: Vec<u64> },
    Labeled { dir: PathBuf, train: Vec<String>, val: Vec<String> },
}

impl Source {
    fn ids(&self, val: bool) -> Vec<String> {
        match self {
            Source::Toy { train_seeds, val_seeds } => {
                let (prefix, n) = if val { ("val", val_seeds.len()) } else { ("train", train_seeds.len()) };
                (0..n).map(|i| format!("{prefix}_{i:04}")).collect()
            }
            Source::Labeled { train, val: v, .. } => if val { v.clone() } else { train.clone() },
        }
    }

    fn seed(&self, val: bool, index: usize) -> Option<u64> {
        match self {
            Source::Toy { train_seeds, val_seeds } => Some(if val { val_seeds[index] } else { train_seeds[index] }),
            Source::Labeled { .. } => None,
        }
    }

    fn load(&self, val: bool, index: usize, cfg: &PipelineConfig) -> Result<SourceFrame> {
        match self {
            Source::Toy { .. } => {
                let scene = generate_scene(self.seed(val, index).expect("toy seed"), &cfg.data.toy);
                Ok(SourceFrame {
                    image: scene.image,
                    semantic: scene.semantic,
                    instances: Some(scene.instances),
                    ego: None,
                })
            }
            Source::Labeled { dir, train, val: v } => {
                let id = if val { &v[index] } else { &train[index] };
                let files = LabeledFiles::new(dir, id);
                let image = read_rgb(&files.image)?;
                let semantic = read_semantic(&files.semantic)?;
                let instances = files.instances.exists().then(|| read_instances(&files.instances)).transpose()?;
                let ego = files.ego.exists().then(|| read_mask(&files.ego)).transpose()?;
                let dims = image.dims();
                for (what, got) in [
                    ("semantic map", Some(semantic.dims())),
                    ("instance map", instances.as_ref().map(Plane::dims)),
                    ("ego mask", ego.as_ref().map(Plane::dims)),
                ] {
                    if let Some(got) = got.filter(|&g| g != dims) {
                        return Err(PipelineError::input(&files.image, format!("{what} is {got:?}, image is {dims:?}")));
                    }
                }
                Ok(SourceFrame {
                    image,
                    semantic,
                    instances,
                    ego,
                })
            }
        }
    }
}

/// Files of a labeled source frame: `images/<id>.png`, `semantic/<id>.png`
/// and the optional `instances/<id>.png` and `ego/<id>.png`.
struct LabeledFiles {
    image: PathBuf,
    semantic: PathBuf,
    instances: PathBuf,
    ego: PathBuf,
}

impl LabeledFiles {
    fn new(dir: &Path, id: &str) -> Self {
        let f = |sub: &str| dir.join(sub).join(format!("{id}.png"));
        Self {
            image: f("images"),
            semantic: f("semantic"),
            instances: f("instances"),
            ego: f("ego"),
        }
    }
}

fn labeled_source(cfg: &PipelineConfig) -> Result<(Source, ClassVocabulary)> {
    let dir = &cfg.paths.source;
    let vocab_path = dir.join("vocabulary.json");
    let images = dir.join("images");
    let mut ids: Vec<String> = match std::fs::read_dir(&images) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .collect(),
        Err(_) => return Err(PipelineError::MissingFiles(vec![images])),
    };
    ids.sort();
    let mut missing: Vec<PathBuf> = ids
        .iter()
        .map(|id| LabeledFiles::new(dir, id).semantic)
        .filter(|p| !p.exists())
        .collect();
    if !vocab_path.exists() {
        missing.push(vocab_path.clone());
    }
    if !missing.is_empty() {
        return Err(PipelineError::MissingFiles(missing));
    }
    if ids.len() <= cfg.data.val_frames {
        return Err(PipelineError::Config(format!(
            "{} source frames leave none for training after {} validation frames",
            ids.len(),
            cfg.data.val_frames
        )));
    }
    let vocab: ClassVocabulary = read_json(&vocab_path)?;
    if vocab.drivable_ids().is_empty() {
        return Err(PipelineError::input(vocab_path, "no road or sidewalk class"));
    }
    let val = ids.split_off(ids.len() - cfg.data.val_frames);
    Ok((
        Source::Labeled {
            dir: dir.clone(),
            train: ids,
            val,
        },
        vocab,
    ))
}

/// Refuse to touch existing outputs unless `force`; with `force`, remove
/// only the entries this command writes.
fn prepare_output(root: &Path, entries: &[&str], force: bool) -> Result<()> {
    let existing: Vec<PathBuf> = entries.iter().map(|e| root.join(e)).filter(|p| p.exists()).collect();
    if existing.is_empty() {
        return Ok(());
    }
    if !force {
        return Err(PipelineError::OutputExists { path: existing[0].clone() });
    }
    for p in existing {
        if p.is_dir() {
            std::fs::remove_dir_all(&p)?;
        } else {
            std::fs::remove_file(&p)?;
        }
    }
    Ok(())
}

const TEST_ENTRIES: [&str; 7] = ["images", "labels", "roi", "semantic", "vocabulary.json", FRAMES_FILE, RUN_MANIFEST_FILE];

pub fn cmd_generate_data(cfg: &PipelineConfig, force: bool) -> Result<GenerateSummary> {
    cfg.validate()?;
    let layout = DatasetLayout::new(&cfg.paths.dataset);
    let (source, vocab) = match cfg.data.source {
        DataSource::Toy => {
            let seeds = |stream, n| (0..n as u64).map(|i| derive_seed(cfg.seed, stream, i)).collect();
            (
                Source::Toy {
                    train_seeds: seeds(STREAM_TRAIN_SCENE, cfg.data.train_frames),
                    val_seeds: seeds(STREAM_VAL_SCENE, cfg.data.val_frames),
                },
                toy_vocabulary(),
            )
        }
        DataSource::Labeled => labeled_source(cfg)?,
    };
    let write_test = cfg.data.source == DataSource::Toy && cfg.data.test_frames > 0;

    let mut entries: Vec<&str> = DatasetLayout::SUBDIRS.to_vec();
    entries.push(MANIFEST_FILE);
    prepare_output(&layout.root, &entries, force)?;
    if write_test {
        prepare_output(&cfg.paths.frames, &TEST_ENTRIES, force)?;
    }
    layout.create()?;

    let train_ids = source.ids(false);
    let val_ids = source.ids(true);
    let (cutouts, extraction) = harvest_cutouts(&source, train_ids.len(), &vocab, cfg)?;
    if cutouts.is_empty() {
        return Err(PipelineError::Config(format!(
            "no object passed the cutout filter ({} rejected by extent, {} by area)",
            extraction.rejected_extent, extraction.rejected_area
        )));
    }
    log::info!("{} cutouts harvested from {} frames", cutouts.len(), train_ids.len());

    let inpainter = build_inpainter(cfg);
    let jobs: Vec<(bool, usize, &String)> = train_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (false, i, id))
        .chain(val_ids.iter().enumerate().map(|(i, id)| (true, i, id)))
        .collect();
    let samples: Vec<(SampleRecord, Option<erasure_core::Rect>)> = jobs
        .par_iter()
        .enumerate()
        .map(|(global, &(val, index, id))| {
            let frame = source.load(val, index, cfg)?;
            let paste_seed = derive_seed(cfg.seed, STREAM_PASTE, global as u64);
            make_sample(&layout, id, &frame, &cutouts, &vocab, inpainter.as_ref(), paste_seed, cfg)
        })
        .collect::<Result<_>>()?;
    let (train, val) = samples.split_at(train_ids.len());

    let infos: Vec<FrameInfo> = train
        .iter()
        .map(|(r, bbox)| FrameInfo {
            id: r.id.clone(),
            width: r.width,
            height: r.height,
            roi_bbox: *bbox,
        })
        .collect();
    let plan = build_epoch_plan(&infos, cfg.train.crop, cfg.train.epochs, derive_seed(cfg.seed, STREAM_PLAN, 0));
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT,
        source: cfg.data.source,
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        cutouts: cutouts.len(),
        extraction,
        train: train.iter().map(|s| s.0.clone()).collect(),
        val: val.iter().map(|s| s.0.clone()).collect(),
        plan,
    };
    write_json(&layout.manifest(), &manifest)?;
    let shortfalls = samples.iter().filter(|s| s.0.shortfall).count();
    if shortfalls > 0 {
        log::warn!("{shortfalls} samples received fewer obstacles than requested");
    }

    let test_frames = if write_test {
        write_toy_test_frames(cfg)?;
        Some(cfg.paths.frames.clone())
    } else {
        None
    };
    Ok(GenerateSummary {
        dataset: layout.root,
        train: manifest.train.len(),
        val: manifest.val.len(),
        cutouts: manifest.cutouts,
        shortfalls,
        test_frames,
    })
}

fn harvest_cutouts(
    source: &Source,
    frames: usize,
    vocab: &ClassVocabulary,
    cfg: &PipelineConfig,
) -> Result<(Vec<ObjectCutout>, ExtractionReport)> {
    let per_frame: Vec<(Vec<ObjectCutout>, ExtractionReport)> = (0..frames)
        .into_par_iter()
        .map(|i| {
            let f = source.load(false, i, cfg)?;
            Ok(extract_cutouts(&f.image, &f.semantic, f.instances.as_ref(), vocab, &cfg.cutouts)?)
        })
        .collect::<Result<_>>()?;
    let mut all = Vec::new();
    let mut report = ExtractionReport::default();
    for (c, r) in per_frame {
        all.extend(c);
        report.merge(r);
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok((all, report))
}

#[allow(clippy::too_many_arguments)]
fn make_sample(
    layout: &DatasetLayout,
    id: &str,
    frame: &SourceFrame,
    cutouts: &[ObjectCutout],
    vocab: &ClassVocabulary,
    inpainter: &dyn Inpainter,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<(SampleRecord, Option<erasure_core::Rect>)> {
    let roi = derive_roi(&frame.semantic, &vocab.drivable_ids(), frame.ego.as_ref(), RoiSource::GroundTruth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (image, obstacles, placed, requested) = if roi.any() {
        let out = paste_obstacles(&frame.image, &roi, cutouts, &mut rng, &cfg.paste)?;
        (out.image, out.obstacle_mask, out.placements.len(), out.requested)
    } else {
        log::warn!("frame {id} has no drivable area; stored without obstacles");
        let (w, h) = frame.image.dims();
        (frame.image.clone(), Plane::filled(w, h, false), 0, cfg.paste.min_count)
    };
    let inpainted = inpaint_roi(&image, &roi, inpainter, &cfg.inpainter.windows)?;
    let labels: LabelMask = Plane::from_fn(image.width(), image.height(), |x, y| {
        if !*roi.get(x, y) {
            LabelMask::IGNORE
        } else if *obstacles.get(x, y) {
            LabelMask::OBSTACLE
        } else {
            LabelMask::BACKGROUND
        }
    });
    write_rgb(&layout.image(id), &image)?;
    write_rgb(&layout.inpainted(id), &inpainted)?;
    write_labels(&layout.mask(id), &labels)?;
    write_mask(&layout.roi(id), &roi)?;
    Ok((
        SampleRecord {
            id: id.to_string(),
            seed,
            width: image.width(),
            height: image.height(),
            obstacles: placed,
            shortfall: placed < requested,
        },
        roi.bbox(),
    ))
}

/// Toy frames with planted geometric obstacles, their ground-truth ROI,
/// labels and simulated semantic segmentation.
fn write_toy_test_frames(cfg: &PipelineConfig) -> Result<()> {
    let dir = &cfg.paths.frames;
    for sub in ["images", "labels", "roi", "semantic"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    let records: Vec<FrameRecord> = (0..cfg.data.test_frames)
        .into_par_iter()
        .map(|i| {
            let id = format!("test_{i:04}");
            let scene = generate_test_frame(derive_seed(cfg.seed, STREAM_TEST_SCENE, i as u64), &cfg.data.toy);
            let rel = |sub: &str| PathBuf::from(sub).join(format!("{id}.png"));
            let rec = FrameRecord {
                id: id.clone(),
                image: rel("images"),
                labels: rel("labels"),
                roi: rel("roi"),
                semantic: Some(rel("semantic")),
                ego: None,
            };
            write_rgb(&dir.join(&rec.image), &scene.image)?;
            write_labels(&dir.join(&rec.labels), &scene.labels)?;
            write_mask(&dir.join(&rec.roi), &scene.roi)?;
            write_semantic(&dir.join(rec.semantic.as_ref().expect("set above")), &scene.semantic)?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    write_json(&dir.join("vocabulary.json"), &toy_vocabulary())?;
    write_json(
        &dir.join(FRAMES_FILE),
        &FrameList {
            vocabulary: Some("vocabulary.json".into()),
            frames: records,
        },
    )?;
    RunManifest::new("generate-data", None, cfg).write(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn existing_outputs_need_force() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("images")).unwrap();
        std::fs::write(dir.path().join("keep.txt"), b"mine").unwrap();
        assert!(matches!(
            prepare_output(dir.path(), &["images", MANIFEST_FILE], false),
            Err(PipelineError::OutputExists { .. })
        ));
        prepare_output(dir.path(), &["images", MANIFEST_FILE], true).unwrap();
        assert!(!dir.path().join("images").exists());
        assert!(dir.path().join("keep.txt").exists());
    }
}
