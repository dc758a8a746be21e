use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::tensor::{gemm, Tensor};

pub const SELU_LAMBDA: f32 = 1.050_701;
pub const SELU_ALPHA: f32 = 1.673_263_2;

/// Weight initialization scheme, by the activation that follows the layer.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// `N(0, 2 / fan_in)`, for ReLU.
    He,
    /// `N(0, 1 / fan_in)`, for SeLU and linear outputs.
    LeCun,
}

fn init_weights<R: Rng + ?Sized>(len: usize, fan_in: usize, init: Init, rng: &mut R) -> Vec<f32> {
    let var = match init {
        Init::He => 2.0,
        Init::LeCun => 1.0,
    } / fan_in as f32;
    let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// Square convolution, stride 1, zero padding `k / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    /// `cout × (cin·k·k)`, row-major.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(cin: usize, cout: usize, k: usize, init: Init, rng: &mut R) -> Self {
        Self {
            cin,
            cout,
            k,
            weight: init_weights(cout * cin * k * k, cin * k * k, init, rng),
            bias: vec![0.0; cout],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn columns<'a>(&self, x: &'a Tensor) -> std::borrow::Cow<'a, [f32]> {
        if self.k == 1 {
            std::borrow::Cow::Borrowed(&x.data)
        } else {
            std::borrow::Cow::Owned(im2col(x, self.k))
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.cin, "conv input channels");
        let hw = x.hw();
        let cols = self.columns(x);
        let mut out = Tensor::zeros(self.cout, x.h, x.w);
        for (co, &b) in self.bias.iter().enumerate() {
            out.channel_mut(co).fill(b);
        }
        gemm(self.cout, self.cin * self.k * self.k, hw, &self.weight, false, &cols, false, &mut out.data, true);
        out
    }

    /// Accumulate parameter gradients into `grad` and return the input
    /// gradient.
    pub fn backward(&self, x: &Tensor, dy: &Tensor, grad: &mut Conv2d) -> Tensor {
        let hw = x.hw();
        let kk = self.cin * self.k * self.k;
        let cols = self.columns(x);
        gemm(self.cout, hw, kk, &dy.data, false, &cols, true, &mut grad.weight, true);
        for (co, g) in grad.bias.iter_mut().enumerate() {
            *g += dy.channel(co).iter().sum::<f32>();
        }
        let mut dcols = vec![0.0; kk * hw];
        gemm(kk, self.cout, hw, &self.weight, true, &dy.data, false, &mut dcols, false);
        if self.k == 1 {
            Tensor::from_vec(self.cin, x.h, x.w, dcols)
        } else {
            col2im(&dcols, self.cin, x.h, x.w, self.k)
        }
    }
}

fn im2col(x: &Tensor, k: usize) -> Vec<f32> {
    let (h, w) = (x.h, x.w);
    let pad = (k / 2) as isize;
    let mut cols = vec![0.0f32; x.c * k * k * h * w];
    for ci in 0..x.c {
        let src = x.channel(ci);
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * h * w;
                let dx = kx as isize - pad;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s = sy as usize * w;
                    let dst = &mut cols[row + y * w + x0..row + y * w + x1];
                    let from = (s as isize + x0 as isize + dx) as usize;
                    dst.copy_from_slice(&src[from..from + (x1 - x0)]);
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f32], c: usize, h: usize, w: usize, k: usize) -> Tensor {
    let pad = (k / 2) as isize;
    let mut out = Tensor::zeros(c, h, w);
    for ci in 0..c {
        let dst = out.channel_mut(ci);
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * h * w;
                let dx = kx as isize - pad;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let from = (sy as usize * w) as isize + x0 as isize + dx;
                    let src = &cols[row + y * w + x0..row + y * w + x1];
                    for (d, s) in dst[from as usize..from as usize + (x1 - x0)].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
    out
}

/// Transposed convolution with a 2×2 kernel and stride 2: doubles the
/// spatial size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpConv2 {
    pub cin: usize,
    pub cout: usize,
    /// `(cout·4) × cin`; row `co·4 + dy·2 + dx`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl UpConv2 {
    pub fn new<R: Rng + ?Sized>(cin: usize, cout: usize, init: Init, rng: &mut R) -> Self {
        Self {
            cin,
            cout,
            weight: init_weights(cout * 4 * cin, cin, init, rng),
            bias: vec![0.0; cout],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.cin, "upconv input channels");
        let hw = x.hw();
        let mut y = vec![0.0; self.cout * 4 * hw];
        gemm(self.cout * 4, self.cin, hw, &self.weight, false, &x.data, false, &mut y, false);
        let (ow, oh) = (2 * x.w, 2 * x.h);
        let mut out = Tensor::zeros(self.cout, oh, ow);
        for co in 0..self.cout {
            let b = self.bias[co];
            let dst = out.channel_mut(co);
            for dy in 0..2 {
                for dx in 0..2 {
                    let src = &y[(co * 4 + dy * 2 + dx) * hw..][..hw];
                    for yy in 0..x.h {
                        let row = &mut dst[(2 * yy + dy) * ow..][..ow];
                        for (xx, s) in src[yy * x.w..(yy + 1) * x.w].iter().enumerate() {
                            row[2 * xx + dx] = s + b;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn backward(&self, x: &Tensor, dy: &Tensor, grad: &mut UpConv2) -> Tensor {
        let hw = x.hw();
        let ow = 2 * x.w;
        let mut g = vec![0.0; self.cout * 4 * hw];
        for co in 0..self.cout {
            let src = dy.channel(co);
            grad.bias[co] += src.iter().sum::<f32>();
            for dyy in 0..2 {
                for dxx in 0..2 {
                    let dst = &mut g[(co * 4 + dyy * 2 + dxx) * hw..][..hw];
                    for yy in 0..x.h {
                        let row = &src[(2 * yy + dyy) * ow..][..ow];
                        for xx in 0..x.w {
                            dst[yy * x.w + xx] = row[2 * xx + dxx];
                        }
                    }
                }
            }
        }
        gemm(self.cout * 4, hw, self.cin, &g, false, &x.data, true, &mut grad.weight, true);
        let mut dx = Tensor::zeros(self.cin, x.h, x.w);
        gemm(self.cin, self.cout * 4, hw, &self.weight, true, &g, false, &mut dx.data, false);
        dx
    }
}

/// 2×2 max pooling, stride 2. Returns the pooled map and the flat input
/// index of every maximum.
pub fn maxpool2(x: &Tensor) -> (Tensor, Vec<u32>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor::zeros(x.c, oh, ow);
    let mut idx = vec![0u32; x.c * oh * ow];
    for c in 0..x.c {
        let base = c * x.hw();
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + 2 * y * x.w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * y + dy) * x.w + 2 * xx + dx;
                    if x.data[i] > x.data[best] {
                        best = i;
                    }
                }
                let o = (c * oh + y) * ow + xx;
                out.data[o] = x.data[best];
                idx[o] = best as u32;
            }
        }
    }
    (out, idx)
}

pub fn maxpool2_backward(dy: &Tensor, idx: &[u32], input: (usize, usize, usize)) -> Tensor {
    let mut dx = Tensor::zeros(input.0, input.1, input.2);
    for (g, &i) in dy.data.iter().zip(idx) {
        dx.data[i as usize] += g;
    }
    dx
}

pub fn relu(x: &mut Tensor) {
    for v in &mut x.data {
        *v = v.max(0.0);
    }
}

/// Gradient through ReLU, given its output.
pub fn relu_backward(out: &Tensor, dy: &mut Tensor) {
    for (g, &o) in dy.data.iter_mut().zip(&out.data) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn selu(x: &mut Tensor) {
    for v in &mut x.data {
        *v = if *v > 0.0 {
            SELU_LAMBDA * *v
        } else {
            SELU_LAMBDA * SELU_ALPHA * v.exp_m1()
        };
    }
}

/// Gradient through SeLU, given its output.
pub fn selu_backward(out: &Tensor, dy: &mut Tensor) {
    for (g, &o) in dy.data.iter_mut().zip(&out.data) {
        *g *= if o > 0.0 { SELU_LAMBDA } else { o + SELU_LAMBDA * SELU_ALPHA };
    }
}

/// Cosine similarity of the two feature vectors at every location:
/// `<a, b> / (|a| |b| + eps)`.
pub fn pointwise_correlation(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!((a.c, a.h, a.w), (b.c, b.h, b.w), "correlation operand shapes");
    let hw = a.hw();
    let mut dot = vec![0.0f64; hw];
    let mut na = vec![0.0f64; hw];
    let mut nb = vec![0.0f64; hw];
    for c in 0..a.c {
        for (i, (&x, &y)) in a.channel(c).iter().zip(b.channel(c)).enumerate() {
            let (x, y) = (x as f64, y as f64);
            dot[i] += x * y;
            na[i] += x * x;
            nb[i] += y * y;
        }
    }
    let data = (0..hw)
        .map(|i| {
            let d = na[i].sqrt() * nb[i].sqrt();
            if d > 0.0 { (dot[i] / d) as f32 } else { 0.0 }
        })
        .collect();
    Tensor::from_vec(1, a.h, a.w, data)
}

pub fn pointwise_correlation_backward(a: &Tensor, b: &Tensor, dc: &Tensor) -> (Tensor, Tensor) {
    let hw = a.hw();
    let mut dot = vec![0.0f64; hw];
    let mut na = vec![0.0f64; hw];
    let mut nb = vec![0.0f64; hw];
    for c in 0..a.c {
        for (i, (&x, &y)) in a.channel(c).iter().zip(b.channel(c)).enumerate() {
            let (x, y) = (x as f64, y as f64);
            dot[i] += x * y;
            na[i] += x * x;
            nb[i] += y * y;
        }
    }
    // d/da = b / D - N |b| a / (|a| D^2), with D = |a||b|; zero where D = 0.
    let mut coef_b = vec![0.0f32; hw];
    let mut coef_a = vec![0.0f32; hw];
    let mut coef_ab = vec![0.0f32; hw];
    let mut coef_ba = vec![0.0f32; hw];
    for i in 0..hw {
        let (la, lb) = (na[i].sqrt(), nb[i].sqrt());
        let d = la * lb;
        if d == 0.0 {
            continue;
        }
        let g = dc.data[i] as f64;
        coef_b[i] = (g / d) as f32;
        coef_a[i] = (-g * dot[i] * lb / (la * d * d)) as f32;
        coef_ba[i] = (-g * dot[i] * la / (lb * d * d)) as f32;
        coef_ab[i] = (g / d) as f32;
    }
    let mut da = Tensor::zeros(a.c, a.h, a.w);
    let mut db = Tensor::zeros(a.c, a.h, a.w);
    for c in 0..a.c {
        let (ac, bc) = (a.channel(c), b.channel(c));
        let dac = da.channel_mut(c);
        for i in 0..hw {
            dac[i] = coef_b[i] * bc[i] + coef_a[i] * ac[i];
        }
        let dbc = db.channel_mut(c);
        for i in 0..hw {
            dbc[i] = coef_ab[i] * ac[i] + coef_ba[i] * bc[i];
        }
    }
    (da, db)
}
