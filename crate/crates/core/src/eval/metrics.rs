use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::curves::{downsample, PrPoint, RocPoint, MAX_CURVE_POINTS};
use crate::image::{check_plane_dims, Heatmap, LabelMask, Plane};

/// One frame prepared for evaluation.
///
/// Pixels count when `roi` is set and the label is not ignore. When a
/// `detection_roi` is given (the ROI the detector itself derived), valid
/// pixels outside it can never be detected, whatever the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFrame {
    pub id: String,
    pub heatmap: Heatmap,
    pub labels: LabelMask,
    pub roi: Plane<bool>,
    pub detection_roi: Option<Plane<bool>>,
}

/// Cumulative counts at one threshold: pixels with `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
}

/// Threshold sweep over every distinct detectable score, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub positives: u64,
    pub negatives: u64,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    pub fn recall(&self, p: &SweepPoint) -> f64 {
        p.tp as f64 / self.positives as f64
    }

    pub fn precision(&self, p: &SweepPoint) -> f64 {
        p.tp as f64 / (p.tp + p.fp) as f64
    }

    pub fn fpr(&self, p: &SweepPoint) -> f64 {
        if self.negatives == 0 {
            0.0
        } else {
            p.fp as f64 / self.negatives as f64
        }
    }
}

/// Build the sweep. Scores of `-inf` mark undetectable pixels: they stay
/// in the positive/negative totals but never pass a threshold.
pub fn sweep(scores: &[f64], labels: &[bool]) -> Result<Sweep> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("score is NaN".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;

    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < pairs.len() && pairs[i].0 != f64::NEG_INFINITY {
        let t = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == t {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(SweepPoint { threshold: t, tp, fp });
    }
    Ok(Sweep {
        positives,
        negatives,
        points,
    })
}

/// Step-interpolated area under the PR curve; `None` without positives.
pub fn sweep_ap(sweep: &Sweep) -> Option<f64> {
    if sweep.positives == 0 {
        return None;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for p in &sweep.points {
        let r = sweep.recall(p);
        ap += (r - prev_recall) * sweep.precision(p);
        prev_recall = r;
    }
    Some(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprAtTpr {
    pub fpr: f64,
    pub reachable: bool,
    /// Threshold of the operating point, when reachable.
    pub threshold: Option<f64>,
}

/// FPR at the first (highest) threshold whose TPR reaches `target`;
/// `None` without positives.
pub fn sweep_fpr_at_tpr(sweep: &Sweep, target: f64) -> Option<FprAtTpr> {
    if sweep.positives == 0 {
        return None;
    }
    Some(
        sweep
            .points
            .iter()
            .find(|p| sweep.recall(p) >= target)
            .map(|p| FprAtTpr {
                fpr: sweep.fpr(p),
                reachable: true,
                threshold: Some(p.threshold),
            })
            .unwrap_or(FprAtTpr {
                fpr: 1.0,
                reachable: false,
                threshold: None,
            }),
    )
}

pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    Ok(sweep_ap(&sweep(scores, labels)?))
}

pub fn fpr_at_tpr(scores: &[f64], labels: &[bool], target: f64) -> Result<Option<FprAtTpr>> {
    Ok(sweep_fpr_at_tpr(&sweep(scores, labels)?, target))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFlag {
    /// AP and FPR95 are undefined.
    NoPositives,
    /// AP is 1 by convention and FPR is 0.
    NoNegatives,
    /// No threshold detects 95% of the obstacle pixels; FPR95 is reported as 1.
    Tpr95Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ap: Option<f64>,
    pub fpr95: Option<f64>,
    pub tpr95_reachable: bool,
    pub fpr95_threshold: Option<f64>,
    pub positive_fraction: f64,
    pub positives: u64,
    pub negatives: u64,
    /// Valid positives outside the detection ROI.
    pub undetectable_positives: u64,
    pub flags: Vec<MetricFlag>,
    pub pr_curve: Vec<PrPoint>,
    pub roc_curve: Vec<RocPoint>,
}

pub const TPR_TARGET: f64 = 0.95;

pub fn evaluate_scores(scores: &[f64], labels: &[bool]) -> Result<MetricReport> {
    let sw = sweep(scores, labels)?;
    let undetectable_positives = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| l && s == f64::NEG_INFINITY)
        .count() as u64;
    let mut flags = Vec::new();
    let mut ap = sweep_ap(&sw);
    let at = sweep_fpr_at_tpr(&sw, TPR_TARGET);
    if sw.positives == 0 {
        flags.push(MetricFlag::NoPositives);
    } else if sw.negatives == 0 {
        flags.push(MetricFlag::NoNegatives);
        ap = Some(1.0);
    }
    if let Some(a) = at.filter(|a| !a.reachable) {
        debug_assert_eq!(a.fpr, 1.0);
        flags.push(MetricFlag::Tpr95Unreachable);
    }

    let (pr, roc, key) = curve_points(&sw);
    let total = sw.positives + sw.negatives;
    Ok(MetricReport {
        ap,
        fpr95: at.map(|a| a.fpr),
        tpr95_reachable: at.is_some_and(|a| a.reachable),
        fpr95_threshold: at.and_then(|a| a.threshold),
        positive_fraction: if total == 0 { 0.0 } else { sw.positives as f64 / total as f64 },
        positives: sw.positives,
        negatives: sw.negatives,
        undetectable_positives,
        flags,
        pr_curve: downsample(&pr, MAX_CURVE_POINTS, key),
        roc_curve: downsample(&roc, MAX_CURVE_POINTS, key.map(|k| k + 1)),
    })
}

/// PR and ROC points per threshold (ROC gets a leading origin), plus the
/// sweep index of the TPR-target point.
fn curve_points(sw: &Sweep) -> (Vec<PrPoint>, Vec<RocPoint>, Option<usize>) {
    if sw.positives == 0 {
        return (Vec::new(), Vec::new(), None);
    }
    let pr = sw
        .points
        .iter()
        .map(|p| PrPoint {
            threshold: p.threshold,
            recall: sw.recall(p),
            precision: sw.precision(p),
        })
        .collect();
    let roc = std::iter::once(RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
    })
    .chain(sw.points.iter().map(|p| RocPoint {
        threshold: Some(p.threshold),
        fpr: sw.fpr(p),
        tpr: sw.recall(p),
    }))
    .collect();
    let key = sw.points.iter().position(|p| sw.recall(p) >= TPR_TARGET);
    (pr, roc, key)
}

/// Valid pixels of a frame as (score, is_obstacle), in raster order.
pub fn frame_pixels(frame: &EvalFrame) -> Result<(Vec<f64>, Vec<bool>)> {
    let dims = frame.heatmap.dims();
    check_plane_dims(&frame.labels, "labels", dims)?;
    check_plane_dims(&frame.roi, "roi", dims)?;
    if let Some(d) = &frame.detection_roi {
        check_plane_dims(d, "detection roi", dims)?;
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, (&label, &in_roi)) in frame.labels.as_slice().iter().zip(frame.roi.as_slice()).enumerate() {
        if !in_roi || label == LabelMask::IGNORE {
            continue;
        }
        if label > LabelMask::OBSTACLE {
            return Err(Error::InvalidParameter(format!(
                "frame {}: label value {label} at pixel {i} is not 0, 1 or 255",
                frame.id
            )));
        }
        let detectable = frame.detection_roi.as_ref().is_none_or(|d| d.as_slice()[i]);
        scores.push(if detectable {
            frame.heatmap.as_slice()[i] as f64
        } else {
            f64::NEG_INFINITY
        });
        labels.push(label == LabelMask::OBSTACLE);
    }
    Ok((scores, labels))
}

pub fn evaluate_frame(frame: &EvalFrame) -> Result<MetricReport> {
    let (s, l) = frame_pixels(frame)?;
    evaluate_scores(&s, &l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub id: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub pooled: MetricReport,
    pub frames: Vec<FrameReport>,
}

/// Pixel-pooled metrics over all frames, plus one report per frame.
pub fn pool_frames(frames: &[EvalFrame]) -> Result<DatasetReport> {
    if frames.is_empty() {
        return Err(Error::InvalidParameter("no frames to evaluate".into()));
    }
    let per_frame: Vec<(Vec<f64>, Vec<bool>, MetricReport)> = frames
        .par_iter()
        .map(|f| {
            let (s, l) = frame_pixels(f)?;
            let r = evaluate_scores(&s, &l)?;
            Ok((s, l, r))
        })
        .collect::<Result<_>>()?;

    let total: usize = per_frame.iter().map(|p| p.0.len()).sum();
    let mut scores = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut reports = Vec::with_capacity(frames.len());
    for (f, (s, l, r)) in frames.iter().zip(per_frame) {
        scores.extend(s);
        labels.extend(l);
        reports.push(FrameReport { id: f.id.clone(), report: r });
    }
    Ok(DatasetReport {
        pooled: evaluate_scores(&scores, &labels)?,
        frames: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive sweep: every distinct detectable score is a threshold,
    /// counts are recomputed from scratch for each.
    fn oracle(scores: &[f64], labels: &[bool]) -> (Option<f64>, Option<(f64, bool)>) {
        let mut thresholds: Vec<f64> = scores.iter().copied().filter(|s| *s != f64::NEG_INFINITY).collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let pos = labels.iter().filter(|&&l| l).count();
        let neg = labels.len() - pos;
        if pos == 0 {
            return (None, None);
        }
        let mut ap = 0.0;
        let mut prev = 0.0;
        let mut fpr95 = None;
        for t in thresholds {
            let mut tp = 0;
            let mut fp = 0;
            for (s, l) in scores.iter().zip(labels) {
                if *s >= t {
                    if *l {
                        tp += 1
                    } else {
                        fp += 1
                    }
                }
            }
            let r = tp as f64 / pos as f64;
            ap += (r - prev) * (tp as f64 / (tp + fp) as f64);
            prev = r;
            if fpr95.is_none() && r >= 0.95 {
                fpr95 = Some((if neg == 0 { 0.0 } else { fp as f64 / neg as f64 }, true));
            }
        }
        (Some(ap), Some(fpr95.unwrap_or((1.0, false))))
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<bool>) {
        let levels = rng.random_range(2..50);
        let prevalence = rng.random_range(0.02..0.5);
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(prevalence)).collect();
        let scores = labels
            .iter()
            .map(|&l| {
                let base = if l { 0.3 } else { 0.0 };
                ((base + rng.random::<f64>()) * levels as f64).floor() / levels as f64
            })
            .collect();
        (scores, labels)
    }

    #[test]
    fn perfect_separation() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(average_precision(&scores, &labels).unwrap(), Some(1.0));
        let at = fpr_at_tpr(&scores, &labels, 0.95).unwrap().unwrap();
        assert_eq!((at.fpr, at.reachable), (0.0, true));
    }

    #[test]
    fn constant_scores_give_prevalence() {
        let labels: Vec<bool> = (0..100).map(|i| i % 4 == 0).collect();
        let scores = vec![0.5; 100];
        assert_eq!(average_precision(&scores, &labels).unwrap(), Some(0.25));
    }

    #[test]
    fn hard_zero_positives_tie_with_zero_negatives() {
        // 6 of 100 positives sit at 0 together with every negative.
        let mut scores = vec![0.9; 94];
        let mut labels = vec![true; 94];
        scores.extend(std::iter::repeat_n(0.0, 6 + 50));
        labels.extend(std::iter::repeat_n(true, 6));
        labels.extend(std::iter::repeat_n(false, 50));
        let at = fpr_at_tpr(&scores, &labels, 0.95).unwrap().unwrap();
        assert_eq!((at.fpr, at.reachable), (1.0, true));
        assert_eq!(oracle(&scores, &labels).1, Some((1.0, true)));
    }

    #[test]
    fn undetectable_positives_make_target_unreachable() {
        let mut scores = vec![0.8; 90];
        let mut labels = vec![true; 90];
        scores.extend(std::iter::repeat_n(f64::NEG_INFINITY, 10));
        labels.extend(std::iter::repeat_n(true, 10));
        scores.extend((0..100).map(|i| i as f64 / 200.0));
        labels.extend(std::iter::repeat_n(false, 100));
        let r = evaluate_scores(&scores, &labels).unwrap();
        assert!(!r.tpr95_reachable);
        assert_eq!(r.fpr95, Some(1.0));
        assert!(r.flags.contains(&MetricFlag::Tpr95Unreachable));
        assert_eq!(r.undetectable_positives, 10);
        assert!((r.ap.unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn degenerate_label_sets() {
        let r = evaluate_scores(&[0.1, 0.2], &[false, false]).unwrap();
        assert_eq!(r.ap, None);
        assert_eq!(r.fpr95, None);
        assert_eq!(r.flags, vec![MetricFlag::NoPositives]);
        let r = evaluate_scores(&[0.1, 0.2], &[true, true]).unwrap();
        assert_eq!(r.ap, Some(1.0));
        assert_eq!(r.fpr95, Some(0.0));
        assert_eq!(r.flags, vec![MetricFlag::NoNegatives]);
    }

    #[test]
    fn nan_and_length_mismatch_are_rejected() {
        assert!(sweep(&[f64::NAN], &[true]).is_err());
        assert!(sweep(&[0.1, 0.2], &[true]).is_err());
    }

    #[test]
    fn matches_oracle_on_large_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (s, l) = random_instance(&mut rng, 10_000);
        let (ap, at) = oracle(&s, &l);
        let fast_ap = average_precision(&s, &l).unwrap().unwrap();
        let fast_at = fpr_at_tpr(&s, &l, 0.95).unwrap().unwrap();
        assert!((fast_ap - ap.unwrap()).abs() <= 1e-12);
        let (fpr, reachable) = at.unwrap();
        assert!((fast_at.fpr - fpr).abs() <= 1e-12);
        assert_eq!(fast_at.reachable, reachable);
    }

    fn frame(id: &str, scores: Vec<f32>, labels: Vec<u8>, w: usize) -> EvalFrame {
        let h = scores.len() / w;
        EvalFrame {
            id: id.into(),
            heatmap: Plane::from_vec(w, h, scores).unwrap(),
            labels: Plane::from_vec(w, h, labels).unwrap(),
            roi: Plane::filled(w, h, true),
            detection_roi: None,
        }
    }

    #[test]
    fn pooling_one_frame_equals_frame_report() {
        let f = frame("a", vec![0.9, 0.1, 0.4, 0.3], vec![1, 0, 0, 255], 2);
        let d = pool_frames(std::slice::from_ref(&f)).unwrap();
        assert_eq!(d.pooled, d.frames[0].report);
        assert_eq!(d.pooled.positives + d.pooled.negatives, 3);
    }

    #[test]
    fn pooling_keeps_negatives_of_frames_without_positives() {
        let a = frame("a", vec![0.9, 0.1], vec![1, 0], 2);
        let b = frame("b", vec![0.95, 0.2], vec![0, 0], 2);
        let d = pool_frames(&[a, b]).unwrap();
        assert_eq!(d.pooled.negatives, 3);
        assert_eq!(d.frames[1].report.flags, vec![MetricFlag::NoPositives]);
        assert!((d.pooled.ap.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pooling_equals_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<EvalFrame> = (0..5)
            .map(|i| {
                let scores: Vec<f32> = (0..96).map(|_| (rng.random::<f32>() * 20.0).floor() / 20.0).collect();
                let labels: Vec<u8> = (0..96).map(|_| [0, 0, 0, 1, 255][rng.random_range(0..5)]).collect();
                frame(&format!("f{i}"), scores, labels, 12)
            })
            .collect();
        let mut s = Vec::new();
        let mut l = Vec::new();
        for f in &frames {
            for (i, &label) in f.labels.as_slice().iter().enumerate() {
                if label != 255 {
                    s.push(f.heatmap.as_slice()[i] as f64);
                    l.push(label == 1);
                }
            }
        }
        let pooled = pool_frames(&frames).unwrap().pooled;
        assert_eq!(pooled.ap, oracle(&s, &l).0);
    }

    #[test]
    fn detection_roi_marks_pixels_undetectable() {
        let mut f = frame("a", vec![0.0, 0.5, 0.0, 0.2], vec![1, 1, 0, 0], 2);
        f.detection_roi = Some(Plane::from_vec(2, 2, vec![false, true, true, true]).unwrap());
        let (s, _) = frame_pixels(&f).unwrap();
        assert_eq!(s[0], f64::NEG_INFINITY);
        let r = evaluate_frame(&f).unwrap();
        assert!(!r.tpr95_reachable);
        assert_eq!(r.undetectable_positives, 1);
    }

    #[test]
    fn bad_label_value_is_rejected() {
        assert!(evaluate_frame(&frame("a", vec![0.1, 0.2], vec![0, 7], 2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fast_sweep_matches_oracle(seed in any::<u64>(), n in 1usize..400) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, l) = random_instance(&mut rng, n);
            let (ap, at) = oracle(&s, &l);
            let fast_ap = average_precision(&s, &l).unwrap();
            let fast_at = fpr_at_tpr(&s, &l, 0.95).unwrap().map(|a| (a.fpr, a.reachable));
            prop_assert_eq!(fast_ap.is_some(), ap.is_some());
            if let (Some(a), Some(b)) = (fast_ap, ap) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert_eq!(fast_at, at);
        }

        #[test]
        fn monotone_transform_invariance(seed in any::<u64>(), n in 2usize..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, l) = random_instance(&mut rng, n);
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v - 1.0).exp()).collect();
            prop_assert_eq!(average_precision(&s, &l).unwrap(), average_precision(&t, &l).unwrap());
            prop_assert_eq!(fpr_at_tpr(&s, &l, 0.95).unwrap().map(|a| (a.fpr, a.reachable)),
                            fpr_at_tpr(&t, &l, 0.95).unwrap().map(|a| (a.fpr, a.reachable)));
        }

        #[test]
        fn shuffling_changes_nothing(seed in any::<u64>(), n in 2usize..300) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, l) = random_instance(&mut rng, n);
            let mut pairs: Vec<_> = s.iter().copied().zip(l.iter().copied()).collect();
            pairs.shuffle(&mut rng);
            let (s2, l2): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
            prop_assert_eq!(evaluate_scores(&s, &l).unwrap(), evaluate_scores(&s2, &l2).unwrap());
        }

        #[test]
        fn ap_is_one_iff_separated(seed in any::<u64>(), n in 2usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, l) = random_instance(&mut rng, n);
            if let Some(ap) = average_precision(&s, &l).unwrap() {
                let min_pos = s.iter().zip(&l).filter(|p| *p.1).map(|p| *p.0).fold(f64::INFINITY, f64::min);
                let max_neg = s.iter().zip(&l).filter(|p| !*p.1).map(|p| *p.0).fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!((ap - 1.0).abs() < 1e-12, min_pos > max_neg);
            }
        }
    }
}
