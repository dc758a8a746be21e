use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::image::Rect;

/// What the scheduler needs to know about a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    pub id: String,
    pub width: usize,
    pub height: usize,
    /// Bounding box of the drivable area, used to keep crops on the road.
    pub roi_bbox: Option<Rect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub frame_id: String,
    pub crop_origin: (usize, usize),
    pub seed: u64,
    /// The frame is smaller than the crop and gets reflection padding.
    pub padded: bool,
}

/// Fixed crop order for every epoch, so that every trained variant sees
/// the same sample sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub crop: (usize, usize),
    pub seed: u64,
    pub epochs: Vec<Vec<ScheduleEntry>>,
}

impl EpochPlan {
    pub fn len(&self) -> usize {
        self.epochs.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Origin range along one axis that keeps the crop in the frame and, when
/// possible, covering the ROI extent `[lo, hi)`.
fn origin_range(frame: usize, crop: usize, roi: Option<(usize, usize)>) -> (usize, usize) {
    let max = frame - crop;
    if let Some((lo, hi)) = roi {
        let (a, b) = if hi - lo <= crop {
            (hi.saturating_sub(crop), lo)
        } else {
            (lo, hi - crop)
        };
        let (a, b) = (a.min(max), b.min(max));
        if a <= b {
            return (a, b);
        }
    }
    (0, max)
}

pub fn build_epoch_plan(frames: &[FrameInfo], crop: (usize, usize), epochs: usize, seed: u64) -> EpochPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let entries = order
            .iter()
            .map(|&i| {
                let f = &frames[i];
                let padded = f.width < crop.0 || f.height < crop.1;
                let pick = |rng: &mut ChaCha8Rng, frame: usize, c: usize, roi: Option<(usize, usize)>| {
                    if frame < c {
                        return 0;
                    }
                    let (a, b) = origin_range(frame, c, roi);
                    rng.random_range(a..=b)
                };
                let x = pick(&mut rng, f.width, crop.0, f.roi_bbox.map(|r| (r.x, r.x_end())));
                let y = pick(&mut rng, f.height, crop.1, f.roi_bbox.map(|r| (r.y, r.y_end())));
                if padded {
                    log::warn!("frame {} ({}x{}) is smaller than the {}x{} crop; padding", f.id, f.width, f.height, crop.0, crop.1);
                }
                ScheduleEntry {
                    frame_id: f.id.clone(),
                    crop_origin: (x, y),
                    seed: rng.random(),
                    padded,
                }
            })
            .collect();
        plan.push(entries);
    }
    EpochPlan {
        crop,
        seed,
        epochs: plan,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize, w: usize, h: usize) -> Vec<FrameInfo> {
        (0..n)
            .map(|i| FrameInfo {
                id: format!("f{i:05}"),
                width: w,
                height: h,
                roi_bbox: Some(Rect::new(0, h / 3, w, h - h / 3)),
            })
            .collect()
    }

    #[test]
    fn same_seed_same_schedule() {
        let f = frames(20, 2048, 1024);
        let a = serde_json::to_vec(&build_epoch_plan(&f, (768, 384), 3, 5)).unwrap();
        let b = serde_json::to_vec(&build_epoch_plan(&f, (768, 384), 3, 5)).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_vec(&build_epoch_plan(&f, (768, 384), 3, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_training_schedule_size() {
        let f = frames(2975, 2048, 1024);
        let plan = build_epoch_plan(&f, (768, 384), 65, 0);
        assert_eq!(plan.epochs.len(), 65);
        assert_eq!(plan.len(), 65 * 2975);
        for epoch in &plan.epochs {
            let mut ids: Vec<_> = epoch.iter().map(|e| e.frame_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), 2975);
        }
    }

    #[test]
    fn single_frame_single_epoch() {
        let plan = build_epoch_plan(&frames(1, 800, 400), (768, 384), 1, 0);
        assert_eq!(plan.len(), 1);
    }

    #[test]
    fn crops_stay_in_frame_and_cover_roi() {
        let f = frames(50, 2048, 1024);
        let plan = build_epoch_plan(&f, (768, 384), 2, 9);
        for e in plan.epochs.iter().flatten() {
            let (x, y) = e.crop_origin;
            assert!(x + 768 <= 2048 && y + 384 <= 1024);
            // The ROI spans rows 341.., taller than the crop: crop lies inside it.
            assert!(y >= 341);
            assert!(!e.padded);
        }
    }

    #[test]
    fn small_frame_is_flagged_for_padding() {
        let plan = build_epoch_plan(&frames(1, 500, 300), (768, 384), 1, 0);
        let e = &plan.epochs[0][0];
        assert!(e.padded);
        assert_eq!(e.crop_origin, (0, 0));
    }
}
