//! Harmonic hole filling by repeated neighbor averaging.
//!
//! Stand-in for a learned inpainter: hole pixels relax toward the mean of
//! their 4-neighbors (successive over-relaxation, raster order) until the
//! largest update drops below the tolerance or the iteration cap is hit.
//! Fragment edges are reflecting, so holes may touch some of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Plane, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionParams {
    pub max_iterations: usize,
    /// Stop once no channel of any hole pixel moves by more than this.
    pub tolerance: f32,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-4,
        }
    }
}

fn touches_all_borders(hole: &Plane<bool>) -> bool {
    let (w, h) = hole.dims();
    let top = hole.row(0).iter().any(|&b| b);
    let bottom = hole.row(h - 1).iter().any(|&b| b);
    let left = (0..h).any(|y| *hole.get(0, y));
    let right = (0..h).any(|y| *hole.get(w - 1, y));
    top && bottom && left && right
}

/// Fill `hole` in `context` by diffusion from the surrounding pixels.
pub fn baseline_inpaint(context: &RgbImage, hole: &Plane<bool>, params: &DiffusionParams) -> Result<RgbImage> {
    let (w, h) = context.dims();
    if hole.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            what: "hole mask",
            got: hole.dims(),
            expected: (w, h),
        });
    }
    let mut out = context.clone();
    if !hole.any() {
        return Ok(out);
    }

    let known: Vec<usize> = (0..w * h).filter(|&i| !hole.as_slice()[i]).collect();
    if touches_all_borders(hole) {
        let source: Vec<usize> = if known.is_empty() { (0..w * h).collect() } else { known };
        let mut mean = [0.0f64; 3];
        for &i in &source {
            let (x, y) = (i % w, i / w);
            let px = context.get(x, y);
            for c in 0..3 {
                mean[c] += px[c] as f64;
            }
        }
        let fill = mean.map(|v| (v / source.len() as f64) as f32);
        for y in 0..h {
            for x in 0..w {
                if *hole.get(x, y) {
                    out.set(x, y, fill);
                }
            }
        }
        return Ok(out);
    }

    // Neighbor lists, and a starting value from the known pixels bordering the hole.
    let mut cells: Vec<(usize, [usize; 4], u8)> = Vec::new();
    let mut seed = [0.0f64; 3];
    let mut seed_count = 0usize;
    let mut counted = vec![false; w * h];
    let (mut bx0, mut by0, mut bx1, mut by1) = (w, h, 0, 0);
    for y in 0..h {
        for x in 0..w {
            if !*hole.get(x, y) {
                continue;
            }
            bx0 = bx0.min(x);
            by0 = by0.min(y);
            bx1 = bx1.max(x);
            by1 = by1.max(y);
            let mut nb = [0usize; 4];
            let mut n = 0u8;
            let candidates = [
                (x > 0).then(|| (x - 1, y)),
                (x + 1 < w).then(|| (x + 1, y)),
                (y > 0).then(|| (x, y - 1)),
                (y + 1 < h).then(|| (x, y + 1)),
            ];
            for (nx, ny) in candidates.into_iter().flatten() {
                let j = ny * w + nx;
                nb[n as usize] = j;
                n += 1;
                if !*hole.get(nx, ny) && !counted[j] {
                    counted[j] = true;
                    let px = context.get(nx, ny);
                    for c in 0..3 {
                        seed[c] += px[c] as f64;
                    }
                    seed_count += 1;
                }
            }
            cells.push((y * w + x, nb, n));
        }
    }
    let seed = seed.map(|v| (v / seed_count.max(1) as f64) as f32);

    let buf = out.as_mut_slice();
    for &(i, _, _) in &cells {
        buf[i * 3..i * 3 + 3].copy_from_slice(&seed);
    }

    let extent = (bx1 - bx0).max(by1 - by0) + 2;
    let omega = 2.0 / (1.0 + (std::f32::consts::PI / extent as f32).sin());
    for _ in 0..params.max_iterations {
        let mut max_update = 0.0f32;
        for &(i, nb, n) in &cells {
            let inv = 1.0 / n as f32;
            for c in 0..3 {
                let mut sum = 0.0f32;
                for &j in &nb[..n as usize] {
                    sum += buf[j * 3 + c];
                }
                let old = buf[i * 3 + c];
                let update = omega * (sum * inv - old);
                buf[i * 3 + c] = old + update;
                max_update = max_update.max(update.abs());
            }
        }
        if max_update < params.tolerance {
            break;
        }
    }
    for v in buf.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}
