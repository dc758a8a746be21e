//! Sliding-window inpainting of the drivable area.
//!
//! [`plan_windows`] lays a grid of square inpaint boxes over the ROI, each
//! window's box ∩ ROI is filled by an [`Inpainter`] that sees the
//! surrounding context box, and [`fuse`] blends the overlapping results
//! with weights that fall off linearly (in Chebyshev distance) from each
//! window center.

mod diffusion;
mod fusion;
mod windows;

use rayon::prelude::*;

pub use diffusion::{baseline_inpaint, DiffusionParams};
pub use fusion::{fuse, fusion_weight, FusionAccumulator, InpaintResult};
pub use windows::{plan_windows, PatchWindow, WindowParams};

use crate::error::{Error, Result};
use crate::image::{check_plane_dims, Plane, RgbImage};

pub type InpaintError = Box<dyn std::error::Error + Send + Sync>;

/// Fills the `hole` pixels of a context fragment.
///
/// The returned fragment must have the context's dimensions; pixels outside
/// the hole are treated as visible context and are not read back.
pub trait Inpainter: Sync {
    fn inpaint(&self, context: &RgbImage, hole: &Plane<bool>) -> Result<RgbImage, InpaintError>;
}

/// The diffusion fill from [`baseline_inpaint`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DiffusionInpainter {
    pub params: DiffusionParams,
}

impl Inpainter for DiffusionInpainter {
    fn inpaint(&self, context: &RgbImage, hole: &Plane<bool>) -> Result<RgbImage, InpaintError> {
        Ok(baseline_inpaint(context, hole, &self.params)?)
    }
}

impl<F> Inpainter for F
where
    F: Fn(&RgbImage, &Plane<bool>) -> Result<RgbImage, InpaintError> + Sync,
{
    fn inpaint(&self, context: &RgbImage, hole: &Plane<bool>) -> Result<RgbImage, InpaintError> {
        self(context, hole)
    }
}

/// Run the inpainter on a single window.
pub fn inpaint_window(
    image: &RgbImage,
    roi: &Plane<bool>,
    window: &PatchWindow,
    inpainter: &dyn Inpainter,
) -> Result<InpaintResult, InpaintError> {
    let ctx = window.context_box;
    let inner = window.inpaint_box_in_context();
    let context = image.crop(ctx);
    let hole = Plane::from_fn(ctx.w, ctx.h, |x, y| inner.contains(x, y) && *roi.get(ctx.x + x, ctx.y + y));
    let filled = inpainter.inpaint(&context, &hole)?;
    if filled.dims() != context.dims() {
        return Err(format!(
            "inpainter returned {:?} for a {:?} context",
            filled.dims(),
            context.dims()
        )
        .into());
    }
    Ok(InpaintResult {
        window: *window,
        pixels: filled.crop(inner),
    })
}

/// Erase the drivable area of `image` window by window and fuse the results.
///
/// Windows run in parallel; fusion is a sequential reduction in window
/// order. Pixels outside the ROI are returned unchanged.
pub fn inpaint_roi(
    image: &RgbImage,
    roi: &Plane<bool>,
    inpainter: &dyn Inpainter,
    params: &WindowParams,
) -> Result<RgbImage> {
    check_plane_dims(roi, "roi", image.dims())?;
    let windows = plan_windows(roi, params)?;
    if windows.is_empty() {
        return Ok(image.clone());
    }
    let outcomes: Vec<_> = windows
        .par_iter()
        .map(|w| inpaint_window(image, roi, w, inpainter))
        .collect();
    let mut results = Vec::with_capacity(outcomes.len());
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                return Err(Error::Inpainter {
                    index,
                    window: windows[index],
                    message: e.to_string(),
                })
            }
        }
    }
    let (mut fused, _) = fuse(&results, image)?;
    for y in 0..image.height() {
        for x in 0..image.width() {
            if !*roi.get(x, y) {
                fused.set(x, y, image.get(x, y));
            }
        }
    }
    Ok(fused)
}
