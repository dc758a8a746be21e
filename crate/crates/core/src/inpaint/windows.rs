use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Plane, Rect};

/// Sliding-window geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowParams {
    /// Side of the square region that gets inpainted.
    pub patch_side: usize,
    /// Relative overlap of consecutive windows, in `[0, 1)`.
    pub overlap: f64,
    /// Side of the square context region shown to the inpainter.
    pub context_side: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            patch_side: 200,
            overlap: 0.7,
            context_side: 400,
        }
    }
}

impl WindowParams {
    pub fn with_patch_side(patch_side: usize) -> Self {
        Self {
            patch_side,
            context_side: 2 * patch_side,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_side < 2 {
            return Err(Error::InvalidParameter(format!(
                "patch side must be at least 2, got {}",
                self.patch_side
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidParameter(format!(
                "overlap must be in [0, 1), got {}",
                self.overlap
            )));
        }
        if self.context_side < self.patch_side {
            return Err(Error::InvalidParameter(format!(
                "context side {} is smaller than patch side {}",
                self.context_side, self.patch_side
            )));
        }
        Ok(())
    }

    /// Grid stride in pixels, `round(patch_side * (1 - overlap))`, at least 1.
    pub fn stride(&self) -> usize {
        ((self.patch_side as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }
}

/// One placement of the sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchWindow {
    /// Center of the inpaint box, `origin + side / 2` on each axis.
    pub center: (usize, usize),
    pub inpaint_box: Rect,
    /// Concentric context region, clamped to the image.
    pub context_box: Rect,
}

impl PatchWindow {
    pub fn new(inpaint_box: Rect, context_side: usize, image: (usize, usize)) -> Self {
        let center = (
            inpaint_box.x + inpaint_box.w / 2,
            inpaint_box.y + inpaint_box.h / 2,
        );
        let margin_x = context_side.saturating_sub(inpaint_box.w) / 2;
        let margin_y = context_side.saturating_sub(inpaint_box.h) / 2;
        let x0 = inpaint_box.x.saturating_sub(margin_x);
        let y0 = inpaint_box.y.saturating_sub(margin_y);
        let x1 = (inpaint_box.x_end() + margin_x).min(image.0);
        let y1 = (inpaint_box.y_end() + margin_y).min(image.1);
        Self {
            center,
            inpaint_box,
            context_box: Rect::new(x0, y0, x1 - x0, y1 - y0),
        }
    }

    /// Inpaint box expressed in context-box coordinates.
    pub fn inpaint_box_in_context(&self) -> Rect {
        Rect::new(
            self.inpaint_box.x - self.context_box.x,
            self.inpaint_box.y - self.context_box.y,
            self.inpaint_box.w,
            self.inpaint_box.h,
        )
    }
}

/// Window origins along one axis: a regular grid at `stride` while the box
/// fits strictly inside, then one window flush with the far edge.
pub(crate) fn axis_origins(len: usize, side: usize, stride: usize) -> Vec<usize> {
    if side >= len {
        return vec![0];
    }
    let mut origins: Vec<usize> = (0..).map(|k| k * stride).take_while(|&o| o + side < len).collect();
    origins.push(len - side);
    origins
}

/// Summed-area table over a boolean mask, for O(1) "any pixel set in box".
pub(crate) struct MaskIntegral {
    width: usize,
    sums: Vec<u32>,
}

impl MaskIntegral {
    pub(crate) fn new(mask: &Plane<bool>) -> Self {
        let (w, h) = mask.dims();
        let stride = w + 1;
        let mut sums = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += u32::from(*mask.get(x, y));
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { width: w, sums }
    }

    pub(crate) fn count(&self, r: &Rect) -> u32 {
        let s = self.width + 1;
        let at = |x: usize, y: usize| self.sums[y * s + x];
        at(r.x_end(), r.y_end()) + at(r.x, r.y) - at(r.x, r.y_end()) - at(r.x_end(), r.y)
    }
}

/// Lay a regular window grid over the image and keep the windows whose
/// inpaint box touches the ROI. Output is row-major.
pub fn plan_windows(roi: &Plane<bool>, params: &WindowParams) -> Result<Vec<PatchWindow>> {
    params.validate()?;
    let (w, h) = roi.dims();
    if w == 0 || h == 0 || !roi.any() {
        return Ok(Vec::new());
    }
    let stride = params.stride();
    let xs = axis_origins(w, params.patch_side, stride);
    let ys = axis_origins(h, params.patch_side, stride);
    let bw = params.patch_side.min(w);
    let bh = params.patch_side.min(h);
    let integral = MaskIntegral::new(roi);

    let mut windows = Vec::new();
    for &y in &ys {
        for &x in &xs {
            let inpaint_box = Rect::new(x, y, bw, bh);
            if integral.count(&inpaint_box) > 0 {
                windows.push(PatchWindow::new(inpaint_box, params.context_side, (w, h)));
            }
        }
    }
    Ok(windows)
}
