use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::image::{Plane, RgbImage};
use crate::inpaint::PatchWindow;

/// Inpainted pixels of one window, covering exactly its inpaint box.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintResult {
    pub window: PatchWindow,
    pub pixels: RgbImage,
}

/// Unnormalized contribution of `window` to pixel `(u, v)`:
/// `1 - (2/s) * max(|u - u_j|, |v - v_j|)`, clamped at zero.
///
/// For a clamped, non-square box the two axes are normalized by their own
/// side, which reduces to the square formula when the box is square.
/// Pixels outside the inpaint box get weight 0.
pub fn fusion_weight(pixel: (usize, usize), window: &PatchWindow) -> f64 {
    let b = &window.inpaint_box;
    if !b.contains(pixel.0, pixel.1) {
        return 0.0;
    }
    let du = (pixel.0 as f64 - window.center.0 as f64).abs() / b.w as f64;
    let dv = (pixel.1 as f64 - window.center.1 as f64).abs() / b.h as f64;
    (1.0 - 2.0 * du.max(dv)).max(0.0)
}

/// Running sums for the weighted average of overlapping windows.
#[derive(Debug, Clone)]
pub struct FusionAccumulator {
    width: usize,
    height: usize,
    weighted_sum: Vec<f64>,
    weight_sum: Vec<f64>,
    plain_sum: Vec<f64>,
    coverage: Plane<u32>,
}

impl FusionAccumulator {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            weighted_sum: vec![0.0; width * height * 3],
            weight_sum: vec![0.0; width * height],
            plain_sum: vec![0.0; width * height * 3],
            coverage: Plane::filled(width, height, 0),
        }
    }

    pub fn add(&mut self, result: &InpaintResult) -> Result<()> {
        let b = result.window.inpaint_box;
        if b.x_end() > self.width || b.y_end() > self.height {
            return Err(Error::InvalidParameter(format!(
                "inpaint box {b:?} exceeds image {}x{}",
                self.width, self.height
            )));
        }
        result.pixels.check_dims("inpaint result", (b.w, b.h))?;
        for fy in 0..b.h {
            for fx in 0..b.w {
                let (x, y) = (b.x + fx, b.y + fy);
                let i = y * self.width + x;
                let weight = fusion_weight((x, y), &result.window);
                let px = result.pixels.get(fx, fy);
                for (c, &v) in px.iter().enumerate() {
                    self.weighted_sum[i * 3 + c] += weight * v as f64;
                    self.plain_sum[i * 3 + c] += v as f64;
                }
                self.weight_sum[i] += weight;
                let n = self.coverage.get(x, y) + 1;
                self.coverage.set(x, y, n);
            }
        }
        Ok(())
    }

    pub fn weight_sum(&self, x: usize, y: usize) -> f64 {
        self.weight_sum[y * self.width + x]
    }

    pub fn coverage(&self) -> &Plane<u32> {
        &self.coverage
    }

    /// Weighted mean where weights are positive, plain mean where every
    /// contributing window sits on its zero-weight edge, `fallback` where
    /// no window contributed.
    pub fn finish(self, fallback: &RgbImage) -> Result<(RgbImage, Plane<u32>)> {
        fallback.check_dims("fallback image", (self.width, self.height))?;
        let mut out = fallback.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                let n = *self.coverage.get(x, y);
                if n == 0 {
                    continue;
                }
                let wsum = self.weight_sum[i];
                let px = if wsum > 0.0 {
                    std::array::from_fn(|c| (self.weighted_sum[i * 3 + c] / wsum) as f32)
                } else {
                    std::array::from_fn(|c| (self.plain_sum[i * 3 + c] / n as f64) as f32)
                };
                out.set(x, y, px);
            }
        }
        Ok((out, self.coverage))
    }
}

fn canonical_order(a: &InpaintResult, b: &InpaintResult) -> Ordering {
    let key = |r: &InpaintResult| {
        let b = r.window.inpaint_box;
        (b.y, b.x, b.h, b.w)
    };
    key(a).cmp(&key(b)).then_with(|| {
        a.pixels
            .as_slice()
            .iter()
            .zip(b.pixels.as_slice())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Blend window inpaintings into one image.
///
/// Results are accumulated in a canonical window order, so any permutation
/// of `results` gives a bit-identical image.
pub fn fuse(results: &[InpaintResult], fallback: &RgbImage) -> Result<(RgbImage, Plane<u32>)> {
    let mut ordered: Vec<&InpaintResult> = results.iter().collect();
    ordered.sort_by(|a, b| canonical_order(a, b));
    let mut acc = FusionAccumulator::new(fallback.width(), fallback.height());
    for r in ordered {
        acc.add(r)?;
    }
    acc.finish(fallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Rect;

    fn window(x: usize, y: usize, s: usize) -> PatchWindow {
        PatchWindow::new(Rect::new(x, y, s, s), 2 * s, (1000, 1000))
    }

    #[test]
    fn weight_examples() {
        let w = window(100, 100, 200);
        assert_eq!(w.center, (200, 200));
        assert_eq!(fusion_weight((200, 200), &w), 1.0);
        assert_eq!(fusion_weight((100, 200), &w), 0.0);
        assert!((fusion_weight((250, 230), &w) - 0.5).abs() < 1e-15);
        assert!((fusion_weight((150, 170), &w) - 0.5).abs() < 1e-15);
        assert_eq!(fusion_weight((300, 200), &w), 0.0);
        assert_eq!(fusion_weight((99, 200), &w), 0.0);
    }

    #[test]
    fn single_window_reproduces_its_pixels() {
        let win = PatchWindow::new(Rect::new(2, 3, 6, 6), 12, (12, 12));
        let pixels = RgbImage::from_fn(6, 6, |x, y| [x as f32 * 0.1, y as f32 * 0.1, 0.3]);
        let fallback = RgbImage::filled(12, 12, [0.9; 3]);
        let (fused, coverage) = fuse(&[InpaintResult { window: win, pixels: pixels.clone() }], &fallback).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                assert_eq!(fused.get(x + 2, y + 3), pixels.get(x, y));
                assert_eq!(*coverage.get(x + 2, y + 3), 1);
            }
        }
        assert_eq!(fused.get(0, 0), [0.9; 3]);
        assert_eq!(*coverage.get(0, 0), 0);
    }

    #[test]
    fn identical_content_is_preserved() {
        let a = PatchWindow::new(Rect::new(0, 0, 8, 8), 16, (16, 16));
        let b = PatchWindow::new(Rect::new(4, 2, 8, 8), 16, (16, 16));
        let c = [0.25, 0.5, 0.75];
        let results = [
            InpaintResult { window: a, pixels: RgbImage::filled(8, 8, c) },
            InpaintResult { window: b, pixels: RgbImage::filled(8, 8, c) },
        ];
        let (fused, _) = fuse(&results, &RgbImage::new(16, 16)).unwrap();
        for y in 0..10 {
            for x in 0..12 {
                if a.inpaint_box.contains(x, y) || b.inpaint_box.contains(x, y) {
                    assert_eq!(fused.get(x, y), c);
                }
            }
        }
    }

    #[test]
    fn zero_weight_edge_falls_back_to_plain_mean() {
        // Pixel (0, 0) lies on the zero-weight corner of both windows.
        let a = PatchWindow::new(Rect::new(0, 0, 4, 4), 8, (8, 8));
        let results = [
            InpaintResult { window: a, pixels: RgbImage::filled(4, 4, [0.2; 3]) },
            InpaintResult { window: a, pixels: RgbImage::filled(4, 4, [0.6; 3]) },
        ];
        let mut acc = FusionAccumulator::new(8, 8);
        for r in &results {
            acc.add(r).unwrap();
        }
        assert_eq!(acc.weight_sum(0, 0), 0.0);
        let (fused, _) = acc.finish(&RgbImage::new(8, 8)).unwrap();
        assert!((fused.get(0, 0)[0] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn empty_results_return_fallback() {
        let fallback = RgbImage::filled(5, 4, [0.1, 0.2, 0.3]);
        let (fused, coverage) = fuse(&[], &fallback).unwrap();
        assert_eq!(fused, fallback);
        assert!(coverage.as_slice().iter().all(|&c| c == 0));
    }

    #[test]
    fn rejects_out_of_bounds_and_wrong_size_results() {
        let win = PatchWindow::new(Rect::new(6, 6, 6, 6), 6, (20, 20));
        let result = InpaintResult { window: win, pixels: RgbImage::new(6, 6) };
        assert!(fuse(&[result], &RgbImage::new(10, 10)).is_err());
        let result = InpaintResult { window: win, pixels: RgbImage::new(5, 6) };
        assert!(fuse(&[result], &RgbImage::new(20, 20)).is_err());
    }
}
