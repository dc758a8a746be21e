use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::image::{Plane, RgbImage};

/// Blur and two-scale noise applied to the original-image stream.
///
/// Noise amplitudes are standard deviations in `[0, 1]` intensity units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub blur: bool,
    pub blur_sigma: f32,
    pub noise: bool,
    pub fine_amplitude: f32,
    pub coarse_amplitude: f32,
    /// Cell size in pixels of the coarse noise lattice.
    pub coarse_cell: usize,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            blur: true,
            blur_sigma: 1.0,
            noise: true,
            fine_amplitude: 0.04,
            coarse_amplitude: 0.08,
            coarse_cell: 16,
        }
    }
}

fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with mirrored borders. `sigma <= 0` is a copy.
pub fn gaussian_blur(image: &RgbImage, sigma: f32) -> RgbImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = image.dims();
    let src = image.as_slice();

    let mut horizontal = vec![0.0f32; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f32; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - radius, w);
                let i = (y * w + sx) * 3;
                for c in 0..3 {
                    acc[c] += wt * src[i + c];
                }
            }
            horizontal[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    let mut out = vec![0.0f32; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f32; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - radius, h);
                let i = (sy * w + x) * 3;
                for c in 0..3 {
                    acc[c] += wt * horizontal[i + c];
                }
            }
            out[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    RgbImage::from_vec(w, h, out).expect("same dimensions")
}

/// Zero-mean Gaussian values on a lattice of `cell`-pixel spacing,
/// bilinearly interpolated to `width × height`.
pub fn lattice_noise<R: Rng + ?Sized>(width: usize, height: usize, cell: usize, sigma: f32, rng: &mut R) -> Plane<f32> {
    let cell = cell.max(1);
    let gw = width.div_ceil(cell) + 1;
    let gh = height.div_ceil(cell) + 1;
    let normal = Normal::new(0.0f32, sigma.max(0.0)).expect("finite sigma");
    let grid: Vec<f32> = (0..gw * gh).map(|_| normal.sample(rng)).collect();
    Plane::from_fn(width, height, |x, y| {
        let fx = x as f32 / cell as f32;
        let fy = y as f32 / cell as f32;
        let (gx, gy) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - gx as f32, fy - gy as f32);
        let at = |i: usize, j: usize| grid[j * gw + i];
        let top = at(gx, gy) * (1.0 - tx) + at(gx + 1, gy) * tx;
        let bottom = at(gx, gy + 1) * (1.0 - tx) + at(gx + 1, gy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}

/// Blur, then add per-pixel and per-cell zero-mean noise (shared across
/// channels), then clamp to `[0, 1]`. Each stage runs only when its flag is
/// set.
pub fn augment_high_freq<R: Rng + ?Sized>(image: &RgbImage, rng: &mut R, params: &AugmentParams) -> RgbImage {
    let mut out = if params.blur {
        gaussian_blur(image, params.blur_sigma)
    } else {
        image.clone()
    };
    if !params.noise {
        return out;
    }
    let (w, h) = out.dims();
    let fine = Normal::new(0.0f32, params.fine_amplitude.max(0.0)).expect("finite amplitude");
    let coarse = lattice_noise(w, h, params.coarse_cell, params.coarse_amplitude, rng);
    for (i, px) in out.as_mut_slice().chunks_exact_mut(3).enumerate() {
        let delta = fine.sample(rng) + coarse.as_slice()[i];
        for v in px {
            *v = (*v + delta).clamp(0.0, 1.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn texture(w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let v = 0.5 + 0.15 * ((x as f32 * 0.7).sin() * (y as f32 * 0.3).cos());
            [v, v * 0.9, 0.45]
        })
    }

    #[test]
    fn zero_settings_are_identity() {
        let img = texture(30, 20);
        let params = AugmentParams {
            blur_sigma: 0.0,
            fine_amplitude: 0.0,
            coarse_amplitude: 0.0,
            ..Default::default()
        };
        let out = augment_high_freq(&img, &mut ChaCha8Rng::seed_from_u64(3), &params);
        assert_eq!(out, img);
    }

    #[test]
    fn flags_off_are_identity() {
        let img = texture(30, 20);
        let params = AugmentParams { blur: false, noise: false, ..Default::default() };
        assert_eq!(augment_high_freq(&img, &mut ChaCha8Rng::seed_from_u64(3), &params), img);
    }

    #[test]
    fn blur_keeps_constant_image() {
        let img = RgbImage::filled(17, 9, [0.3, 0.5, 0.7]);
        let params = AugmentParams { noise: false, blur_sigma: 2.5, ..Default::default() };
        let out = augment_high_freq(&img, &mut ChaCha8Rng::seed_from_u64(0), &params);
        for (a, b) in out.as_slice().iter().zip(img.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn blur_smooths_an_impulse() {
        let mut img = RgbImage::new(11, 11);
        img.set(5, 5, [1.0; 3]);
        let out = gaussian_blur(&img, 1.0);
        let total: f32 = out.as_slice().iter().step_by(3).sum();
        assert!((total - 1.0).abs() < 1e-5);
        assert!(out.get(5, 5)[0] < 0.2);
        assert!(out.get(5, 5)[0] > out.get(6, 5)[0]);
    }

    #[test]
    fn noise_is_zero_mean() {
        let img = texture(64, 48);
        let input_mean = img.mean()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let params = AugmentParams::default();
        let means: Vec<f64> = (0..100).map(|_| augment_high_freq(&img, &mut rng, &params).mean()[0]).collect();
        let avg = means.iter().sum::<f64>() / 100.0;
        let var = means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / 99.0;
        let sigma_of_avg = (var / 100.0).sqrt();
        assert!((avg - input_mean).abs() < 3.0 * sigma_of_avg, "{avg} vs {input_mean} (sigma {sigma_of_avg})");
    }

    #[test]
    fn reflect_indexing() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(12, 5), 4);
        assert_eq!(reflect(-3, 1), 0);
    }
}
