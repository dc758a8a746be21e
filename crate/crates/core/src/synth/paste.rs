use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_plane_dims, Plane, RgbImage};
use crate::synth::ObjectCutout;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PasteParams {
    /// Obstacles per sample, drawn uniformly from `min_count..=max_count`.
    pub min_count: usize,
    pub max_count: usize,
    /// Rejection-sampling attempts per obstacle before giving up on it.
    pub max_attempts: usize,
    pub mirror_probability: f64,
}

impl Default for PasteParams {
    fn default() -> Self {
        Self {
            min_count: 1,
            max_count: 6,
            max_attempts: 200,
            mirror_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub cutout: usize,
    pub x: usize,
    pub y: usize,
    pub mirrored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PasteOutcome {
    pub image: RgbImage,
    pub obstacle_mask: Plane<bool>,
    pub placements: Vec<Placement>,
    pub requested: usize,
}

impl PasteOutcome {
    /// Fewer obstacles were placed than requested.
    pub fn shortfall(&self) -> bool {
        self.placements.len() < self.requested
    }
}

fn fits(roi: &Plane<bool>, alpha: &Plane<bool>, x: usize, y: usize) -> bool {
    (0..alpha.height()).all(|ay| {
        let roi_row = &roi.row(y + ay)[x..x + alpha.width()];
        alpha.row(ay).iter().zip(roi_row).all(|(&a, &r)| !a || r)
    })
}

/// Draw a top-left position uniformly among those where every alpha pixel
/// lands inside the ROI, by rejection from the in-bounds positions.
pub fn sample_placement<R: Rng + ?Sized>(
    roi: &Plane<bool>,
    alpha: &Plane<bool>,
    rng: &mut R,
    max_attempts: usize,
) -> Option<(usize, usize)> {
    let (w, h) = roi.dims();
    let (aw, ah) = alpha.dims();
    if aw > w || ah > h {
        return None;
    }
    (0..max_attempts).find_map(|_| {
        let x = rng.random_range(0..=w - aw);
        let y = rng.random_range(0..=h - ah);
        fits(roi, alpha, x, y).then_some((x, y))
    })
}

/// Composite randomly chosen cutouts onto the ROI of `image`.
pub fn paste_obstacles<R: Rng + ?Sized>(
    image: &RgbImage,
    roi: &Plane<bool>,
    cutouts: &[ObjectCutout],
    rng: &mut R,
    params: &PasteParams,
) -> Result<PasteOutcome> {
    check_plane_dims(roi, "roi", image.dims())?;
    if cutouts.is_empty() {
        return Err(Error::InvalidParameter("no cutouts to paste".into()));
    }
    if !roi.any() {
        return Err(Error::InvalidParameter("cannot paste onto an empty roi".into()));
    }
    if params.min_count > params.max_count {
        return Err(Error::InvalidParameter(format!(
            "min_count {} exceeds max_count {}",
            params.min_count, params.max_count
        )));
    }

    let requested = rng.random_range(params.min_count..=params.max_count);
    let mut out = image.clone();
    let mut obstacle_mask = Plane::filled(image.width(), image.height(), false);
    let mut placements = Vec::with_capacity(requested);

    for _ in 0..requested {
        let index = rng.random_range(0..cutouts.len());
        let mirrored = rng.random_bool(params.mirror_probability);
        let flipped;
        let cutout = if mirrored {
            flipped = cutouts[index].mirrored();
            &flipped
        } else {
            &cutouts[index]
        };
        let Some((x, y)) = sample_placement(roi, &cutout.alpha, rng, params.max_attempts) else {
            continue;
        };
        for ay in 0..cutout.alpha.height() {
            for ax in 0..cutout.alpha.width() {
                if *cutout.alpha.get(ax, ay) {
                    out.set(x + ax, y + ay, cutout.rgb.get(ax, ay));
                    obstacle_mask.set(x + ax, y + ay, true);
                }
            }
        }
        placements.push(Placement { cutout: index, x, y, mirrored });
    }
    if placements.len() < requested {
        log::debug!("placed {} of {requested} obstacles", placements.len());
    }
    Ok(PasteOutcome {
        image: out,
        obstacle_mask,
        placements,
        requested,
    })
}
