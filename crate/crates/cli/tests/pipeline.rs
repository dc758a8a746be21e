mod common;

use common::{small_config, tree_hashes};
use erasure_cli::ablate::{cmd_ablate, AblateOptions};
use erasure_cli::dataset::{DatasetLayout, DatasetManifest};
use erasure_cli::evaluate::cmd_evaluate;
use erasure_cli::generate::cmd_generate_data;
use erasure_cli::infer::{cmd_infer, heatmap_dir};
use erasure_cli::io::{read_heatmap, HeatmapFiles};
use erasure_cli::training::cmd_train;
use erasure_cli::{PipelineConfig, PipelineError, Variant};
use erasure_core::image::RoiSource;

fn run_all(cfg: &PipelineConfig, force: bool) {
    cmd_generate_data(cfg, force).unwrap();
    cmd_train(cfg).unwrap();
    let inferred = cmd_infer(cfg).unwrap();
    assert!(inferred.failed.is_empty(), "{:?}", inferred.failed);
    cmd_evaluate(cfg).unwrap();
}

#[test]
fn small_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let generated = cmd_generate_data(&cfg, false).unwrap();
    assert_eq!((generated.train, generated.val), (6, 2));
    assert!(generated.cutouts > 0);
    let manifest = DatasetManifest::load(&DatasetLayout::new(&cfg.paths.dataset)).unwrap();
    assert_eq!(manifest.plan.epochs.len(), 2);
    assert!(manifest.plan.epochs.iter().all(|e| e.len() == 6));

    let trained = cmd_train(&cfg).unwrap();
    assert_eq!(trained.history.len(), 2);
    assert!(trained.checkpoint.exists());
    let history = std::fs::read_to_string(trained.run_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    let inferred = cmd_infer(&cfg).unwrap();
    assert_eq!(inferred.frames, 3);
    let hdir = heatmap_dir(&cfg, Variant::Full);
    for i in 0..3 {
        let files = HeatmapFiles::new(&hdir, &format!("test_{i:04}"));
        let heat = read_heatmap(&files.heatmap).unwrap();
        assert_eq!(heat.dims(), (64, 32));
        assert!(heat.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(files.sidecar.exists());
        assert!(!files.roi.exists());
    }

    let evaluated = cmd_evaluate(&cfg).unwrap();
    assert_eq!(evaluated.report.frames.len(), 3);
    assert!(evaluated.report.pooled.ap.is_some());
    assert!(evaluated.report.frames.iter().all(|f| f.report.pr_curve.is_empty()));
    let frames_csv = std::fs::read_to_string(evaluated.dir.join("frames.csv")).unwrap();
    assert_eq!(frames_csv.lines().count(), 4);
    for name in ["report.json", "pooled_pr.csv", "pooled_roc.csv", "pooled_curves.png", "run_manifest.json"] {
        assert!(evaluated.dir.join(name).exists(), "{name}");
    }
}

#[test]
fn rerunning_every_command_reproduces_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_all(&cfg, false);
    let first = tree_hashes(dir.path());
    run_all(&cfg, true);
    assert_eq!(tree_hashes(dir.path()), first);
}

#[test]
fn generation_refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate_data(&cfg, false).unwrap();
    assert!(matches!(cmd_generate_data(&cfg, false), Err(PipelineError::OutputExists { .. })));
    cmd_generate_data(&cfg, true).unwrap();
}

#[test]
fn inference_never_reads_label_masks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate_data(&cfg, false).unwrap();
    cmd_train(&cfg).unwrap();
    std::fs::remove_dir_all(cfg.paths.frames.join("labels")).unwrap();
    let inferred = cmd_infer(&cfg).unwrap();
    assert!(inferred.failed.is_empty());
    match cmd_evaluate(&cfg) {
        Err(PipelineError::MissingFiles(m)) => assert_eq!(m.len(), 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn broken_frames_are_reported_and_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate_data(&cfg, false).unwrap();
    cmd_train(&cfg).unwrap();
    std::fs::write(cfg.paths.frames.join("images/test_0001.png"), b"not a png").unwrap();
    let inferred = cmd_infer(&cfg).unwrap();
    assert_eq!(inferred.failed.len(), 1);
    assert_eq!(inferred.failed[0].id, "test_0001");
    let hdir = heatmap_dir(&cfg, Variant::Full);
    assert!(!HeatmapFiles::new(&hdir, "test_0001").heatmap.exists());
    assert!(HeatmapFiles::new(&hdir, "test_0002").heatmap.exists());
    match cmd_evaluate(&cfg) {
        Err(PipelineError::Unmatched(ids)) => assert_eq!(ids, ["test_0001 (no heatmap)"]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn stray_heatmaps_are_unmatched() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.variant = Variant::NoDiscrepancy;
    cmd_generate_data(&cfg, false).unwrap();
    cmd_infer(&cfg).unwrap();
    let hdir = heatmap_dir(&cfg, Variant::NoDiscrepancy);
    std::fs::copy(HeatmapFiles::new(&hdir, "test_0000").sidecar, hdir.join("ghost.json")).unwrap();
    match cmd_evaluate(&cfg) {
        Err(PipelineError::Unmatched(ids)) => assert_eq!(ids, ["ghost (no frame)"]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn network_variants_need_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate_data(&cfg, false).unwrap();
    let err = cmd_infer(&cfg).unwrap_err();
    assert!(err.is_config(), "{err}");
    let mut l1 = cfg.clone();
    l1.variant = Variant::NoDiscrepancy;
    assert!(cmd_train(&l1).unwrap_err().is_config());
}

#[test]
fn predicted_roi_is_stored_and_used_for_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.variant = Variant::SegmentationAlone;
    cfg.roi.source = RoiSource::Predicted;
    cmd_generate_data(&cfg, false).unwrap();
    cmd_infer(&cfg).unwrap();
    let hdir = heatmap_dir(&cfg, Variant::SegmentationAlone);
    assert!(HeatmapFiles::new(&hdir, "test_0000").roi.exists());
    let report = cmd_evaluate(&cfg).unwrap().report;
    assert_eq!(report.roi_source, RoiSource::Predicted);
}

#[test]
fn ablation_writes_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate_data(&cfg, false).unwrap();
    let opts = AblateOptions {
        variants: Some(vec![Variant::NoDiscrepancy, Variant::Full, Variant::SegmentationAlone]),
        train_missing: true,
    };
    let summary = cmd_ablate(&cfg, &opts).unwrap();
    let names: Vec<_> = summary.rows.iter().map(|r| r.variant).collect();
    assert_eq!(names, [Variant::Full, Variant::NoDiscrepancy, Variant::SegmentationAlone]);
    let csv = std::fs::read_to_string(summary.dir.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let table = std::fs::read_to_string(summary.dir.join("ablation.txt")).unwrap();
    assert!(table.contains("Reference full-scale result"));
    assert!(cfg.checkpoint_path(Variant::Full).exists());
}

#[test]
fn single_variant_ablation_is_a_one_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate_data(&cfg, false).unwrap();
    let opts = AblateOptions {
        variants: Some(vec![Variant::NoDiscrepancy]),
        train_missing: false,
    };
    let summary = cmd_ablate(&cfg, &opts).unwrap();
    assert_eq!(summary.rows.len(), 1);
    let csv = std::fs::read_to_string(summary.dir.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(summary.table.lines().nth(1).unwrap().starts_with("no_discrepancy"));
}
