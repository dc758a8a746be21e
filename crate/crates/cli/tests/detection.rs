mod common;

use common::small_config;
use std::sync::atomic::{AtomicUsize, Ordering};

use erasure_cli::detect::{inpaint_input, score, FrameInput};
use erasure_cli::external::ExternalInpainter;
use erasure_cli::io::write_rgb;
use erasure_cli::Variant;
use erasure_core::eval::{evaluate_frame, evaluate_scores, frame_pixels, pool_frames, EvalFrame};
use erasure_core::image::RoiSource;
use erasure_core::inpaint::{inpaint_roi, InpaintError, Inpainter, WindowParams};
use erasure_core::{Plane, RgbImage, RoiMask};
use erasure_net::DiscrepancyNet;

fn textured(w: usize, h: usize) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let v = ((x * 7 + y * 13) % 17) as f32 / 16.0;
        [v, 1.0 - v, 0.5]
    })
}

fn input(roi: Plane<bool>) -> FrameInput {
    FrameInput {
        id: "f".into(),
        image: textured(64, 32),
        roi: RoiMask::new(roi, RoiSource::GroundTruth),
        semantic: None,
        ego: None,
    }
}

#[test]
fn l1_of_a_perfect_reconstruction_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let f = input(Plane::filled(64, 32, true));
    let heat = score(&f, Some(&f.image), Variant::NoDiscrepancy, None, None, &cfg).unwrap();
    assert!(heat.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn empty_roi_gives_a_zero_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let model = DiscrepancyNet::new(cfg.model.clone(), 3).unwrap();
    let f = input(Plane::filled(64, 32, false));
    let other = RgbImage::filled(64, 32, [0.2, 0.9, 0.1]);
    for v in [Variant::Full, Variant::NoInpainting, Variant::NoBlur, Variant::NoDiscrepancy] {
        let heat = score(&f, Some(&other), v, Some(&model), None, &cfg).unwrap();
        assert!(heat.as_slice().iter().all(|&x| x == 0.0), "{v}");
    }
}

struct Counting(AtomicUsize);

impl Inpainter for Counting {
    fn inpaint(&self, context: &RgbImage, _hole: &Plane<bool>) -> Result<RgbImage, InpaintError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok(context.clone())
    }
}

#[test]
fn empty_roi_never_calls_the_inpainter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let counter = Counting(AtomicUsize::new(0));
    let empty = input(Plane::filled(64, 32, false));
    let out = inpaint_input(&empty, &[Variant::Full], &counter, &cfg).unwrap().unwrap();
    assert_eq!(out, empty.image);
    assert_eq!(counter.0.load(Ordering::SeqCst), 0);
    let heat = score(&empty, Some(&out), Variant::NoDiscrepancy, None, None, &cfg).unwrap();
    assert!(heat.as_slice().iter().all(|&v| v == 0.0));

    let some = input(Plane::from_fn(64, 32, |x, _| x < 5));
    inpaint_input(&some, &[Variant::Full], &counter, &cfg).unwrap();
    assert!(counter.0.load(Ordering::SeqCst) > 0);
    assert!(inpaint_input(&some, &[Variant::SegmentationAlone], &counter, &cfg).unwrap().is_none());
}

#[test]
fn scoring_without_required_inputs_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let f = input(Plane::filled(64, 32, true));
    assert!(score(&f, None, Variant::NoDiscrepancy, None, None, &cfg).unwrap_err().is_config());
    assert!(score(&f, Some(&f.image), Variant::Full, None, None, &cfg).unwrap_err().is_config());
    assert!(score(&f, None, Variant::SegmentationAlone, None, None, &cfg).unwrap_err().is_config());
}

#[test]
fn pooling_one_frame_equals_its_own_report() {
    let heat = Plane::from_fn(20, 10, |x, y| ((x * 3 + y * 5) % 11) as f32 / 10.0);
    let labels = Plane::from_fn(20, 10, |x, y| if (x + y) % 4 == 0 { 1u8 } else if x == 0 { 255 } else { 0 });
    let frame = EvalFrame {
        id: "one".into(),
        heatmap: heat,
        labels,
        roi: Plane::from_fn(20, 10, |_, y| y > 1),
        detection_roi: None,
    };
    let pooled = pool_frames(std::slice::from_ref(&frame)).unwrap();
    let own = evaluate_frame(&frame).unwrap();
    assert_eq!(pooled.pooled, own);
    assert_eq!(pooled.frames[0].report, own);
}

#[test]
fn pooled_metrics_equal_metrics_of_concatenated_pixels() {
    let frames: Vec<EvalFrame> = (0..4)
        .map(|k| EvalFrame {
            id: format!("f{k}"),
            heatmap: Plane::from_fn(16, 8, |x, y| ((x * 5 + y * 3 + k * 7) % 13) as f32 / 12.0),
            labels: Plane::from_fn(16, 8, |x, y| u8::from((x + 2 * y + k) % 6 == 0)),
            roi: Plane::from_fn(16, 8, |x, _| x != k),
            detection_roi: (k % 2 == 1).then(|| Plane::from_fn(16, 8, |_, y| y > 0)),
        })
        .collect();
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for f in &frames {
        let (s, l) = frame_pixels(f).unwrap();
        scores.extend(s);
        labels.extend(l);
    }
    assert_eq!(pool_frames(&frames).unwrap().pooled, evaluate_scores(&scores, &labels).unwrap());
}

fn copy_command(source: &str) -> Vec<String> {
    vec!["sh".into(), "-c".into(), "cp \"$0\" \"$1\"".into(), source.into(), "{output}".into()]
}

#[test]
fn external_inpainter_round_trips_pngs() {
    let inpainter = ExternalInpainter::new(copy_command("{context}"));
    let ctx = textured(12, 9);
    let hole = Plane::from_fn(12, 9, |x, _| x > 3);
    let out = inpainter.inpaint(&ctx, &hole).unwrap();
    assert_eq!(out.dims(), (12, 9));
    for (a, b) in out.as_slice().iter().zip(ctx.as_slice()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
    }
}

#[test]
fn external_inpainter_drives_window_fusion() {
    let inpainter = ExternalInpainter::new(copy_command("{context}"));
    let img = textured(40, 24);
    let roi = Plane::from_fn(40, 24, |_, y| y >= 8);
    let out = inpaint_roi(&img, &roi, &inpainter, &WindowParams::with_patch_side(12)).unwrap();
    for (a, b) in out.as_slice().iter().zip(img.as_slice()) {
        assert!((a - b).abs() <= 1.0 / 255.0);
    }
}

#[test]
fn external_inpainter_failures_are_errors() {
    let failing = ExternalInpainter::new(vec!["sh".into(), "-c".into(), "echo broken >&2; exit 3".into()]);
    let err = failing.inpaint(&textured(8, 8), &Plane::filled(8, 8, true)).unwrap_err();
    assert!(err.to_string().contains("broken"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.png");
    write_rgb(&small, &textured(4, 4)).unwrap();
    let wrong_size = ExternalInpainter::new(copy_command(small.to_str().unwrap()));
    assert!(wrong_size.inpaint(&textured(8, 8), &Plane::filled(8, 8, true)).is_err());

    let missing = ExternalInpainter::new(vec!["/nonexistent/inpaint".into()]);
    assert!(missing.inpaint(&textured(8, 8), &Plane::filled(8, 8, true)).is_err());
}
