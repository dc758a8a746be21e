use erasure_core::inpaint::{fuse, InpaintResult, PatchWindow};
use erasure_core::{Rect, RgbImage};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    image: RgbImage,
    results: Vec<InpaintResult>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let w = rng.random_range(8..=128);
    let h = rng.random_range(8..=128);
    let image = RgbImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]);
    let n = rng.random_range(1..=10);
    let results = (0..n)
        .map(|_| {
            let side = rng.random_range(2..=w.min(h));
            let x = rng.random_range(0..=w - side);
            let y = rng.random_range(0..=h - side);
            let window = PatchWindow::new(Rect::new(x, y, side, side), 2 * side, (w, h));
            let pixels = RgbImage::from_fn(side, side, |_, _| [rng.random(), rng.random(), rng.random()]);
            InpaintResult { window, pixels }
        })
        .collect();
    Instance { image, results }
}

/// Direct per-pixel evaluation: every window that contains the pixel
/// contributes `1 - (2/s) max(|u - u_j|, |v - v_j|)`.
fn oracle(inst: &Instance) -> (Vec<[f64; 3]>, Vec<f64>) {
    let (w, h) = inst.image.dims();
    let mut out = Vec::with_capacity(w * h);
    let mut weight_sums = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let mut num = [0.0f64; 3];
            let mut plain = [0.0f64; 3];
            let mut den = 0.0;
            let mut count = 0;
            for r in &inst.results {
                let b = r.window.inpaint_box;
                if u < b.x || u >= b.x + b.w || v < b.y || v >= b.y + b.h {
                    continue;
                }
                let s = b.w as f64;
                let (cu, cv) = ((b.x + b.w / 2) as f64, (b.y + b.h / 2) as f64);
                let d = (u as f64 - cu).abs().max((v as f64 - cv).abs());
                let wt = (1.0 - 2.0 / s * d).max(0.0);
                let px = r.pixels.get(u - b.x, v - b.y);
                for c in 0..3 {
                    num[c] += wt * px[c] as f64;
                    plain[c] += px[c] as f64;
                }
                den += wt;
                count += 1;
            }
            weight_sums.push(den);
            out.push(if count == 0 {
                inst.image.get(u, v).map(f64::from)
            } else if den > 0.0 {
                num.map(|n| n / den)
            } else {
                plain.map(|p| p / count as f64)
            });
        }
    }
    (out, weight_sums)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fuse_matches_per_pixel_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let (fused, coverage) = fuse(&inst.results, &inst.image).unwrap();
        let (expected, weight_sums) = oracle(&inst);
        let w = inst.image.width();
        for (i, e) in expected.iter().enumerate() {
            let got = fused.get(i % w, i / w);
            for c in 0..3 {
                prop_assert!((got[c] as f64 - e[c]).abs() <= 1e-6, "pixel {i} channel {c}: {} vs {}", got[c], e[c]);
            }
            if weight_sums[i] > 0.0 {
                prop_assert!(coverage.as_slice()[i] > 0);
            }
        }
    }

    #[test]
    fn normalized_weights_sum_to_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let (w, h) = inst.image.dims();
        for v in 0..h {
            for u in 0..w {
                let ws: Vec<f64> = inst.results.iter().map(|r| erasure_core::inpaint::fusion_weight((u, v), &r.window)).collect();
                let total: f64 = ws.iter().sum();
                if total > 0.0 {
                    let normalized: f64 = ws.iter().map(|x| x / total).sum();
                    prop_assert!((normalized - 1.0).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn fuse_is_permutation_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let (a, ca) = fuse(&inst.results, &inst.image).unwrap();
        let mut shuffled = inst.results.clone();
        shuffled.shuffle(&mut rng);
        let (b, cb) = fuse(&shuffled, &inst.image).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ca, cb);
    }
}
