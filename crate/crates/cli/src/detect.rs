//! Per-frame detection: ROI, inpainting and the variant's scorer.

use erasure_core::drivable::{derive_roi, segmentation_alone_score, ClassVocabulary, SemanticMap};
use erasure_core::image::RoiSource;
use erasure_core::inpaint::{inpaint_roi, DiffusionInpainter, Inpainter};
use erasure_core::synth::gaussian_blur;
use erasure_core::{Heatmap, Plane, RgbImage, RoiMask};
use erasure_net::DiscrepancyNet;

use crate::config::{InpainterKind, PipelineConfig, Variant};
use crate::dataset::FrameRecord;
use crate::error::{PipelineError, Result};
use crate::external::ExternalInpainter;
use crate::io::{read_mask, read_rgb, read_semantic};

pub fn build_inpainter(cfg: &PipelineConfig) -> Box<dyn Inpainter> {
    match cfg.inpainter.kind {
        InpainterKind::Baseline => Box::new(DiffusionInpainter {
            params: cfg.inpainter.diffusion,
        }),
        InpainterKind::External => Box::new(ExternalInpainter::new(cfg.inpainter.command.clone())),
    }
}

/// Everything detection may look at. Label masks are deliberately absent.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub id: String,
    pub image: RgbImage,
    pub roi: RoiMask,
    pub semantic: Option<SemanticMap>,
    pub ego: Option<Plane<bool>>,
}

pub fn load_frame_input(rec: &FrameRecord, roi_source: RoiSource, vocab: Option<&ClassVocabulary>) -> Result<FrameInput> {
    let image = read_rgb(&rec.image)?;
    let dims = image.dims();
    let check = |what: &str, got: (usize, usize), path: &std::path::Path| {
        if got == dims {
            Ok(())
        } else {
            Err(PipelineError::input(path, format!("{what} is {got:?}, image is {dims:?}")))
        }
    };
    let semantic = match &rec.semantic {
        Some(p) => {
            let sem = read_semantic(p)?;
            check("semantic map", sem.dims(), p)?;
            if let Some(v) = vocab {
                v.validate(&sem).map_err(|e| PipelineError::input(p, e.to_string()))?;
            }
            Some(sem)
        }
        None => None,
    };
    let ego = match &rec.ego {
        Some(p) => {
            let m = read_mask(p)?;
            check("ego mask", m.dims(), p)?;
            Some(m)
        }
        None => None,
    };
    let roi = match roi_source {
        RoiSource::GroundTruth => {
            let m = read_mask(&rec.roi)?;
            check("roi", m.dims(), &rec.roi)?;
            RoiMask::new(m, RoiSource::GroundTruth)
        }
        RoiSource::Predicted => {
            let (Some(sem), Some(vocab)) = (&semantic, vocab) else {
                return Err(PipelineError::Config(format!(
                    "frame {}: a predicted roi needs a semantic map and a vocabulary",
                    rec.id
                )));
            };
            derive_roi(sem, &vocab.drivable_ids(), ego.as_ref(), RoiSource::Predicted)?
        }
    };
    Ok(FrameInput {
        id: rec.id.clone(),
        image,
        roi,
        semantic,
        ego,
    })
}

/// Erase the ROI, or `None` when the variant does not use an inpainting.
pub fn inpaint_input(input: &FrameInput, variants: &[Variant], inpainter: &dyn Inpainter, cfg: &PipelineConfig) -> Result<Option<RgbImage>> {
    if !variants.iter().any(|v| v.needs_inpainting()) {
        return Ok(None);
    }
    Ok(Some(inpaint_roi(&input.image, &input.roi, inpainter, &cfg.inpainter.windows)?))
}

/// The original-image stream as the network of `variant` expects it.
pub fn original_stream(image: &RgbImage, variant: Variant, cfg: &PipelineConfig) -> RgbImage {
    let aug = variant.train_augment(&cfg.augment);
    if aug.blur && aug.blur_sigma > 0.0 {
        gaussian_blur(image, aug.blur_sigma)
    } else {
        image.clone()
    }
}

/// Mean absolute RGB difference per pixel, zero outside the ROI.
pub fn l1_discrepancy(a: &RgbImage, b: &RgbImage, roi: &Plane<bool>) -> Heatmap {
    Plane::from_fn(a.width(), a.height(), |x, y| {
        if !*roi.get(x, y) {
            return 0.0;
        }
        let (p, q) = (a.get(x, y), b.get(x, y));
        ((p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs()) / 3.0
    })
}

/// Score a frame with `variant`. `inpainted` is required for variants that
/// use it, `model` for network variants.
pub fn score(
    input: &FrameInput,
    inpainted: Option<&RgbImage>,
    variant: Variant,
    model: Option<&DiscrepancyNet>,
    vocab: Option<&ClassVocabulary>,
    cfg: &PipelineConfig,
) -> Result<Heatmap> {
    let need_inpainted = || {
        inpainted.ok_or_else(|| PipelineError::Config(format!("variant {variant} needs an inpainted image")))
    };
    let need_model = || model.ok_or_else(|| PipelineError::Config(format!("variant {variant} needs a checkpoint")));
    let roi = &input.roi.mask;
    let heat = match variant {
        Variant::NoDiscrepancy => l1_discrepancy(&input.image, need_inpainted()?, roi),
        Variant::SegmentationAlone => {
            let (Some(sem), Some(vocab)) = (&input.semantic, vocab) else {
                return Err(PipelineError::Config(format!(
                    "frame {}: segmentation_alone needs a semantic map and a vocabulary",
                    input.id
                )));
            };
            let s = segmentation_alone_score(sem, &vocab.drivable_ids(), input.ego.as_ref())?;
            Plane::from_fn(s.width(), s.height(), |x, y| if *roi.get(x, y) { *s.get(x, y) } else { 0.0 })
        }
        Variant::NoInpainting => {
            let a = original_stream(&input.image, variant, cfg);
            need_model()?.predict(&a, &a, roi)?
        }
        Variant::Full | Variant::NoNoiseAug | Variant::NoBlur => {
            let a = original_stream(&input.image, variant, cfg);
            need_model()?.predict(&a, need_inpainted()?, roi)?
        }
    };
    Ok(heat)
}
