use erasure_core::image::check_dims_pair;
use erasure_core::{Heatmap, LabelMask, Plane, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::layers::{
    maxpool2, maxpool2_backward, pointwise_correlation, pointwise_correlation_backward, relu, relu_backward, selu,
    selu_backward, Conv2d, Init, UpConv2,
};
use crate::loss::{weighted_bce_logits, BceOutput};
use crate::tensor::Tensor;

/// Layer plan of the two-stream network.
///
/// The backbone has one entry per pyramid level: `convs_per_level[l]` 3×3
/// convolutions with ReLU to `backbone_channels[l]` channels, then 2×2 max
/// pooling; the pooled map is that level's tap. `fusion_channels[l]` is the
/// width of the 1×1 fusion of the two streams at level `l` (one correlation
/// channel is appended). `decoder_channels[l]` is the decoder width at the
/// resolution of level `l`, for every level but the deepest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub backbone_channels: Vec<usize>,
    pub convs_per_level: Vec<usize>,
    pub fusion_channels: Vec<usize>,
    pub decoder_channels: Vec<usize>,
    /// Width of the full-resolution layer before the 2-logit output.
    pub head_channels: usize,
    /// Start the backbone from externally trained weights.
    pub pretrained_backbone: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone_channels: vec![16, 24, 32, 48],
            convs_per_level: vec![2, 2, 2, 2],
            fusion_channels: vec![8, 16, 24, 32],
            decoder_channels: vec![16, 24, 32],
            head_channels: 16,
            pretrained_backbone: false,
        }
    }
}

impl ModelConfig {
    /// VGG16 channel plan (first four blocks), for full-scale runs.
    pub fn vgg16() -> Self {
        Self {
            backbone_channels: vec![64, 128, 256, 512],
            convs_per_level: vec![2, 2, 3, 3],
            fusion_channels: vec![64, 128, 256, 256],
            decoder_channels: vec![64, 128, 256],
            head_channels: 32,
            pretrained_backbone: true,
        }
    }

    pub fn levels(&self) -> usize {
        self.backbone_channels.len()
    }

    /// Input sides are padded up to a multiple of this.
    pub fn size_multiple(&self) -> usize {
        1 << self.levels()
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        let err = |level: Option<usize>, message: String| Err(NetError::Config { level, message });
        if levels < 2 {
            return err(None, format!("need at least 2 pyramid levels, got {levels}"));
        }
        if levels > 8 {
            return err(None, format!("{levels} pyramid levels is more than the supported 8"));
        }
        for (name, len, want) in [
            ("convs_per_level", self.convs_per_level.len(), levels),
            ("fusion_channels", self.fusion_channels.len(), levels),
            ("decoder_channels", self.decoder_channels.len(), levels - 1),
        ] {
            if len != want {
                return err(None, format!("{name} has {len} entries, expected {want}"));
            }
        }
        for l in 0..levels {
            if self.backbone_channels[l] == 0 || self.convs_per_level[l] == 0 || self.fusion_channels[l] == 0 {
                return err(Some(l), "zero channels or convolutions".into());
            }
            if l + 1 < levels && self.decoder_channels[l] == 0 {
                return err(Some(l), "zero decoder channels".into());
            }
        }
        if self.head_channels == 0 {
            return err(None, "zero head channels".into());
        }
        Ok(())
    }
}

/// The two-stream discrepancy network.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyNet {
    pub config: ModelConfig,
    pub backbone: Vec<Vec<Conv2d>>,
    pub fuse: Vec<Conv2d>,
    /// `up[l]` brings the decoder from level `l + 1` to level `l`.
    pub up: Vec<UpConv2>,
    pub decode: Vec<Conv2d>,
    pub head_up: UpConv2,
    pub head: Conv2d,
}

/// Input normalization applied to both streams.
const INPUT_MEAN: f32 = 0.45;
const INPUT_SCALE: f32 = 4.0;

struct StreamCache {
    conv_in: Vec<Vec<Tensor>>,
    conv_out: Vec<Vec<Tensor>>,
    pool_idx: Vec<Vec<u32>>,
    taps: Vec<Tensor>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    a: StreamCache,
    b: StreamCache,
    fuse_in: Vec<Tensor>,
    fuse_out: Vec<Tensor>,
    fused: Vec<Tensor>,
    up_in: Vec<Tensor>,
    up_out: Vec<Tensor>,
    dec_in: Vec<Tensor>,
    dec_out: Vec<Tensor>,
    head_up_in: Tensor,
    head_up_out: Tensor,
    /// Image size before padding.
    size: (usize, usize),
    /// `z1 - z0` over the unpadded image.
    pub logit_diff: Plane<f32>,
}

impl DiscrepancyNet {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = config.levels();
        let mut backbone = Vec::with_capacity(levels);
        let mut cin = 3;
        for l in 0..levels {
            let cout = config.backbone_channels[l];
            let convs = (0..config.convs_per_level[l])
                .map(|j| Conv2d::new(if j == 0 { cin } else { cout }, cout, 3, Init::He, &mut rng))
                .collect();
            backbone.push(convs);
            cin = cout;
        }
        let fuse = (0..levels)
            .map(|l| Conv2d::new(2 * config.backbone_channels[l], config.fusion_channels[l], 1, Init::LeCun, &mut rng))
            .collect();
        let fused_width = |l: usize| config.fusion_channels[l] + 1;
        let mut up = Vec::with_capacity(levels - 1);
        let mut decode = Vec::with_capacity(levels - 1);
        for l in 0..levels - 1 {
            let from = if l + 2 == levels { fused_width(levels - 1) } else { config.decoder_channels[l + 1] };
            let width = config.decoder_channels[l];
            up.push(UpConv2::new(from, width, Init::LeCun, &mut rng));
            decode.push(Conv2d::new(width + fused_width(l), width, 3, Init::LeCun, &mut rng));
        }
        let head_up = UpConv2::new(config.decoder_channels[0], config.head_channels, Init::LeCun, &mut rng);
        let head = Conv2d::new(config.head_channels, 2, 3, Init::LeCun, &mut rng);
        Ok(Self {
            config,
            backbone,
            fuse,
            up,
            decode,
            head_up,
            head,
        })
    }

    /// Same layout with every parameter zero; used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            backbone: self.backbone.iter().map(|lv| lv.iter().map(Conv2d::zeros_like).collect()).collect(),
            fuse: self.fuse.iter().map(Conv2d::zeros_like).collect(),
            up: self.up.iter().map(UpConv2::zeros_like).collect(),
            decode: self.decode.iter().map(Conv2d::zeros_like).collect(),
            head_up: self.head_up.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    /// Named parameter tensors with their shapes, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &Vec<f32>)> {
        fn conv<'a>(out: &mut Vec<(String, Vec<usize>, &'a Vec<f32>)>, name: String, c: &'a Conv2d) {
            out.push((format!("{name}.weight"), vec![c.cout, c.cin, c.k, c.k], &c.weight));
            out.push((format!("{name}.bias"), vec![c.cout], &c.bias));
        }
        let mut out = Vec::new();
        for (l, level) in self.backbone.iter().enumerate() {
            for (j, c) in level.iter().enumerate() {
                conv(&mut out, format!("backbone.{l}.{j}"), c);
            }
        }
        for (l, c) in self.fuse.iter().enumerate() {
            conv(&mut out, format!("fuse.{l}"), c);
        }
        for (l, (u, d)) in self.up.iter().zip(&self.decode).enumerate() {
            out.push((format!("up.{l}.weight"), vec![u.cout, 2, 2, u.cin], &u.weight));
            out.push((format!("up.{l}.bias"), vec![u.cout], &u.bias));
            conv(&mut out, format!("decode.{l}"), d);
        }
        out.push(("head_up.weight".into(), vec![self.head_up.cout, 2, 2, self.head_up.cin], &self.head_up.weight));
        out.push(("head_up.bias".into(), vec![self.head_up.cout], &self.head_up.bias));
        conv(&mut out, "head".into(), &self.head);
        out
    }

    /// Mutable parameter tensors in the order of [`DiscrepancyNet::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f32>> {
        let mut out: Vec<&mut Vec<f32>> = Vec::new();
        for level in &mut self.backbone {
            for c in level {
                out.push(&mut c.weight);
                out.push(&mut c.bias);
            }
        }
        for c in &mut self.fuse {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        for (u, d) in self.up.iter_mut().zip(&mut self.decode) {
            out.push(&mut u.weight);
            out.push(&mut u.bias);
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out.push(&mut self.head_up.weight);
        out.push(&mut self.head_up.bias);
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    /// Add `other` (same layout) into `self`, scaled by `scale`.
    pub fn add_scaled(&mut self, other: &DiscrepancyNet, scale: f32) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src.2) {
                *d += scale * s;
            }
        }
    }

    fn prepare(&self, img: &RgbImage) -> Tensor {
        let m = self.config.size_multiple();
        let (w, h) = img.dims();
        let (pw, ph) = (w.div_ceil(m) * m, h.div_ceil(m) * m);
        let mut t = Tensor::zeros(3, ph, pw);
        let src = img.as_slice();
        for c in 0..3 {
            let dst = t.channel_mut(c);
            for y in 0..ph {
                let sy = y.min(h - 1);
                for x in 0..pw {
                    let sx = x.min(w - 1);
                    dst[y * pw + x] = (src[(sy * w + sx) * 3 + c] - INPUT_MEAN) * INPUT_SCALE;
                }
            }
        }
        t
    }

    fn stream_forward(&self, x: Tensor) -> StreamCache {
        let levels = self.config.levels();
        let mut cache = StreamCache {
            conv_in: Vec::with_capacity(levels),
            conv_out: Vec::with_capacity(levels),
            pool_idx: Vec::with_capacity(levels),
            taps: Vec::with_capacity(levels),
        };
        let mut cur = x;
        for level in &self.backbone {
            let mut ins = Vec::with_capacity(level.len());
            let mut outs = Vec::with_capacity(level.len());
            for conv in level {
                let mut y = conv.forward(&cur);
                relu(&mut y);
                ins.push(cur);
                outs.push(y.clone());
                cur = y;
            }
            let (tap, idx) = maxpool2(&cur);
            cache.conv_in.push(ins);
            cache.conv_out.push(outs);
            cache.pool_idx.push(idx);
            cache.taps.push(tap.clone());
            cur = tap;
        }
        cache
    }

    fn stream_backward(&self, cache: &StreamCache, dtaps: Vec<Tensor>, grads: &mut DiscrepancyNet) {
        let mut carry: Option<Tensor> = None;
        for (l, mut dtap) in dtaps.into_iter().enumerate().rev() {
            if let Some(c) = carry.take() {
                dtap.add_assign(&c);
            }
            let last = cache.conv_out[l].last().expect("level has convolutions");
            let mut g = maxpool2_backward(&dtap, &cache.pool_idx[l], (last.c, last.h, last.w));
            for j in (0..self.backbone[l].len()).rev() {
                relu_backward(&cache.conv_out[l][j], &mut g);
                g = self.backbone[l][j].backward(&cache.conv_in[l][j], &g, &mut grads.backbone[l][j]);
            }
            carry = Some(g);
        }
    }

    /// Forward pass on an image pair of equal size.
    pub fn forward(&self, original: &RgbImage, inpainted: &RgbImage) -> Result<ForwardCache> {
        check_dims_pair(original.dims(), inpainted.dims(), "inpainted image")?;
        let size = original.dims();
        if size.0 == 0 || size.1 == 0 {
            return Err(NetError::Data {
                id: String::new(),
                message: "empty image".into(),
            });
        }
        let a = self.stream_forward(self.prepare(original));
        let b = self.stream_forward(self.prepare(inpainted));
        let levels = self.config.levels();

        let mut fuse_in = Vec::with_capacity(levels);
        let mut fuse_out = Vec::with_capacity(levels);
        let mut fused = Vec::with_capacity(levels);
        for l in 0..levels {
            let cat = Tensor::concat(&[&a.taps[l], &b.taps[l]]);
            let mut s = self.fuse[l].forward(&cat);
            selu(&mut s);
            let corr = pointwise_correlation(&a.taps[l], &b.taps[l]);
            fused.push(Tensor::concat(&[&s, &corr]));
            fuse_in.push(cat);
            fuse_out.push(s);
        }

        let empty = || Tensor::zeros(0, 0, 0);
        let mut up_in: Vec<Tensor> = (0..levels - 1).map(|_| empty()).collect();
        let mut up_out: Vec<Tensor> = (0..levels - 1).map(|_| empty()).collect();
        let mut dec_in: Vec<Tensor> = (0..levels - 1).map(|_| empty()).collect();
        let mut dec_out: Vec<Tensor> = (0..levels - 1).map(|_| empty()).collect();
        let mut d = fused[levels - 1].clone();
        for l in (0..levels - 1).rev() {
            let mut u = self.up[l].forward(&d);
            selu(&mut u);
            let cat = Tensor::concat(&[&u, &fused[l]]);
            let mut o = self.decode[l].forward(&cat);
            selu(&mut o);
            up_in[l] = std::mem::replace(&mut d, o.clone());
            up_out[l] = u;
            dec_in[l] = cat;
            dec_out[l] = o;
        }
        let mut h = self.head_up.forward(&d);
        selu(&mut h);
        let logits = self.head.forward(&h);
        let (w, hgt) = size;
        let pw = logits.w;
        let logit_diff = Plane::from_fn(w, hgt, |x, y| logits.data[logits.hw() + y * pw + x] - logits.data[y * pw + x]);
        Ok(ForwardCache {
            a,
            b,
            fuse_in,
            fuse_out,
            fused,
            up_in,
            up_out,
            dec_in,
            dec_out,
            head_up_in: d,
            head_up_out: h,
            size,
            logit_diff,
        })
    }

    /// Parameter gradients given `d loss / d (z1 - z0)` over the unpadded
    /// image.
    pub fn backward(&self, cache: &ForwardCache, dlogit_diff: &Plane<f32>) -> DiscrepancyNet {
        let mut grads = self.zeros_like();
        let levels = self.config.levels();
        let (ph, pw) = (cache.head_up_out.h, cache.head_up_out.w);
        let mut dlogits = Tensor::zeros(2, ph, pw);
        for y in 0..cache.size.1 {
            for x in 0..cache.size.0 {
                let g = *dlogit_diff.get(x, y);
                dlogits.data[y * pw + x] = -g;
                dlogits.data[ph * pw + y * pw + x] = g;
            }
        }
        let mut dh = self.head.backward(&cache.head_up_out, &dlogits, &mut grads.head);
        selu_backward(&cache.head_up_out, &mut dh);
        let mut dd = self.head_up.backward(&cache.head_up_in, &dh, &mut grads.head_up);

        let mut dfused: Vec<Option<Tensor>> = (0..levels).map(|_| None).collect();
        for (l, slot) in dfused.iter_mut().take(levels - 1).enumerate() {
            selu_backward(&cache.dec_out[l], &mut dd);
            let dcat = self.decode[l].backward(&cache.dec_in[l], &dd, &mut grads.decode[l]);
            let mut parts = dcat.split(&[cache.up_out[l].c, cache.fused[l].c]).into_iter();
            let mut du = parts.next().expect("two parts");
            *slot = parts.next();
            selu_backward(&cache.up_out[l], &mut du);
            dd = self.up[l].backward(&cache.up_in[l], &du, &mut grads.up[l]);
        }
        dfused[levels - 1] = Some(dd);

        let mut dtaps_a = Vec::with_capacity(levels);
        let mut dtaps_b = Vec::with_capacity(levels);
        for (l, df) in dfused.into_iter().enumerate() {
            let df = df.expect("every level receives a gradient");
            let mut parts = df.split(&[self.config.fusion_channels[l], 1]).into_iter();
            let mut ds = parts.next().expect("fusion part");
            let dcorr = parts.next().expect("correlation part");
            selu_backward(&cache.fuse_out[l], &mut ds);
            let dcat = self.fuse[l].backward(&cache.fuse_in[l], &ds, &mut grads.fuse[l]);
            let c = self.config.backbone_channels[l];
            let mut halves = dcat.split(&[c, c]).into_iter();
            let mut da = halves.next().expect("stream a");
            let mut db = halves.next().expect("stream b");
            let (ca, cb) = pointwise_correlation_backward(&cache.a.taps[l], &cache.b.taps[l], &dcorr);
            da.add_assign(&ca);
            db.add_assign(&cb);
            dtaps_a.push(da);
            dtaps_b.push(db);
        }
        self.stream_backward(&cache.a, dtaps_a, &mut grads);
        self.stream_backward(&cache.b, dtaps_b, &mut grads);
        grads
    }

    /// Obstacle probability per pixel, `softmax(z)[1] = sigmoid(z1 - z0)`,
    /// multiplied by the ROI.
    pub fn predict(&self, original: &RgbImage, inpainted: &RgbImage, roi: &Plane<bool>) -> Result<Heatmap> {
        check_dims_pair(original.dims(), roi.dims(), "roi")?;
        let cache = self.forward(original, inpainted)?;
        Ok(Plane::from_fn(roi.width(), roi.height(), |x, y| {
            if *roi.get(x, y) {
                sigmoid(*cache.logit_diff.get(x, y))
            } else {
                0.0
            }
        }))
    }

    /// Loss on one sample and, if requested, the parameter gradients.
    pub fn loss_and_grad(&self, sample: &Sample, pos_weight: f64, with_grad: bool) -> Result<(BceOutput, Option<DiscrepancyNet>)> {
        sample.check()?;
        let cache = self.forward(&sample.original, &sample.inpainted)?;
        let bce = weighted_bce_logits(&cache.logit_diff, &sample.labels, &sample.roi, pos_weight)?;
        let grads = with_grad.then(|| {
            let g = Plane::from_vec(cache.size.0, cache.size.1, bce.grad.iter().map(|&v| v as f32).collect())
                .expect("gradient has image size");
            self.backward(&cache, &g)
        });
        Ok((bce, grads))
    }
}

pub fn sigmoid(z: f32) -> f32 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One training example: the (augmented) original stream, its inpainting,
/// per-pixel labels and the drivable-area mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub original: RgbImage,
    pub inpainted: RgbImage,
    pub labels: LabelMask,
    pub roi: Plane<bool>,
}

impl Sample {
    pub fn check(&self) -> Result<()> {
        let dims = self.original.dims();
        let wrap = |e: erasure_core::Error| NetError::Data {
            id: self.id.clone(),
            message: e.to_string(),
        };
        check_dims_pair(dims, self.inpainted.dims(), "inpainted image").map_err(wrap)?;
        check_dims_pair(dims, self.labels.dims(), "labels").map_err(wrap)?;
        check_dims_pair(dims, self.roi.dims(), "roi").map_err(wrap)?;
        Ok(())
    }

    /// Mirror every plane left to right.
    pub fn mirrored(&self) -> Sample {
        let flip = |p: &Plane<u8>| Plane::from_fn(p.width(), p.height(), |x, y| *p.get(p.width() - 1 - x, y));
        let flip_b = |p: &Plane<bool>| Plane::from_fn(p.width(), p.height(), |x, y| *p.get(p.width() - 1 - x, y));
        Sample {
            id: self.id.clone(),
            original: self.original.mirrored(),
            inpainted: self.inpainted.mirrored(),
            labels: flip(&self.labels),
            roi: flip_b(&self.roi),
        }
    }
}
