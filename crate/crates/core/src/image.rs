//! Raster containers shared by every stage.
//!
//! Images are stored as interleaved RGB `f32` in `[0, 1]`, row-major.
//! Single-channel maps (masks, labels, heatmaps, class ids) use [`Plane`].

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned pixel rectangle, half-open: `[x, x + w) × [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn x_end(&self) -> usize {
        self.x + self.w
    }

    pub fn y_end(&self) -> usize {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x_end() && y >= self.y && y < self.y_end()
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x_end() <= self.x_end()
            && other.y_end() <= self.y_end()
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.x_end().min(other.x_end());
        let y1 = self.y_end().min(other.y_end());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }
}

/// A single-channel raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Plane<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "plane buffer has {} elements, expected {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn crop(&self, rect: Rect) -> Plane<T> {
        Plane::from_fn(rect.w, rect.h, |x, y| self.get(rect.x + x, rect.y + y).clone())
    }
}

impl<T> Plane<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

impl Plane<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    /// Tight bounding box of the set pixels, `None` when the mask is empty.
    pub fn bbox(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if *self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

/// Where a region-of-interest mask came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoiSource {
    #[default]
    GroundTruth,
    Predicted,
}

/// Binary drivable-area mask with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask {
    pub mask: Plane<bool>,
    pub source: RoiSource,
}

impl RoiMask {
    pub fn new(mask: Plane<bool>, source: RoiSource) -> Self {
        Self { mask, source }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(Plane::filled(width, height, true), RoiSource::GroundTruth)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(Plane::filled(width, height, false), RoiSource::GroundTruth)
    }
}

impl Deref for RoiMask {
    type Target = Plane<bool>;

    fn deref(&self) -> &Plane<bool> {
        &self.mask
    }
}

impl DerefMut for RoiMask {
    fn deref_mut(&mut self) -> &mut Plane<bool> {
        &mut self.mask
    }
}

/// Per-pixel ground truth: [`LabelMask::BACKGROUND`], [`LabelMask::OBSTACLE`]
/// or [`LabelMask::IGNORE`].
pub type LabelMask = Plane<u8>;

impl LabelMask {
    pub const BACKGROUND: u8 = 0;
    pub const OBSTACLE: u8 = 1;
    pub const IGNORE: u8 = 255;
}

/// Per-pixel obstacle score in `[0, 1]`.
pub type Heatmap = Plane<f32>;

/// Interleaved RGB image, `f32` channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidParameter(format!(
                "rgb buffer has {} values, expected {width}x{height}x3",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn crop(&self, rect: Rect) -> RgbImage {
        RgbImage::from_fn(rect.w, rect.h, |x, y| self.get(rect.x + x, rect.y + y))
    }

    /// Copy `fragment` into `self` with its top-left corner at `(x, y)`.
    pub fn paste(&mut self, fragment: &RgbImage, x: usize, y: usize) {
        for fy in 0..fragment.height {
            for fx in 0..fragment.width {
                self.set(x + fx, y + fy, fragment.get(fx, fy));
            }
        }
    }

    pub fn mirrored(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn mean(&self) -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                acc[c] += px[c] as f64;
            }
        }
        let n = (self.width * self.height).max(1) as f64;
        acc.map(|v| v / n)
    }

    pub fn check_dims(&self, what: &'static str, expected: (usize, usize)) -> Result<()> {
        if self.dims() != expected {
            return Err(Error::DimensionMismatch {
                what,
                got: self.dims(),
                expected,
            });
        }
        Ok(())
    }

    pub fn from_rgb8(img: &::image::RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        Self {
            width: w as usize,
            height: h as usize,
            data,
        }
    }

    pub fn to_rgb8(&self) -> ::image::RgbImage {
        let raw = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        ::image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }
}

pub(crate) fn check_plane_dims<T>(plane: &Plane<T>, what: &'static str, expected: (usize, usize)) -> Result<()> {
    check_dims_pair(expected, plane.dims(), what)
}

/// `Err(DimensionMismatch)` naming `what` unless `got == expected`.
pub fn check_dims_pair(expected: (usize, usize), got: (usize, usize), what: &'static str) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch { what, got, expected });
    }
    Ok(())
}
