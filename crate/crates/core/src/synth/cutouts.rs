use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::drivable::{ClassRole, ClassVocabulary, SemanticMap};
use crate::error::Result;
use crate::image::{check_plane_dims, Plane, Rect, RgbImage};

/// Size limits for objects that are allowed to become obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoutFilter {
    /// Bounds on the larger bounding-box side, inclusive.
    pub min_extent: usize,
    pub max_extent: usize,
    /// Bounds on the mask pixel count, inclusive.
    pub min_area: usize,
    pub max_area: usize,
}

impl Default for CutoutFilter {
    fn default() -> Self {
        Self {
            min_extent: 10,
            max_extent: 150,
            min_area: 100,
            max_area: 5000,
        }
    }
}

impl CutoutFilter {
    pub fn extent_ok(&self, w: usize, h: usize) -> bool {
        (self.min_extent..=self.max_extent).contains(&w.max(h))
    }

    pub fn area_ok(&self, area: usize) -> bool {
        (self.min_area..=self.max_area).contains(&area)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCutout {
    /// Pixels of the bounding box.
    pub rgb: RgbImage,
    /// Object shape within the bounding box.
    pub alpha: Plane<bool>,
    pub source_class: u16,
    pub bbox_extent: (usize, usize),
    pub area: usize,
}

impl ObjectCutout {
    pub fn mirrored(&self) -> ObjectCutout {
        let (w, h) = self.alpha.dims();
        ObjectCutout {
            rgb: self.rgb.mirrored(),
            alpha: Plane::from_fn(w, h, |x, y| *self.alpha.get(w - 1 - x, y)),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub accepted: usize,
    pub rejected_extent: usize,
    pub rejected_area: usize,
    /// Instance-labeled classes that fell back to connected components.
    pub fallback_classes: Vec<u16>,
    pub warnings: Vec<String>,
}

impl ExtractionReport {
    pub fn merge(&mut self, other: ExtractionReport) {
        self.accepted += other.accepted;
        self.rejected_extent += other.rejected_extent;
        self.rejected_area += other.rejected_area;
        for c in other.fallback_classes {
            if !self.fallback_classes.contains(&c) {
                self.fallback_classes.push(c);
            }
        }
        self.warnings.extend(other.warnings);
    }
}

/// 4-connected components of `mask`, each as a pixel list, in raster order
/// of their first pixel.
pub(crate) fn components(mask: &Plane<bool>) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.as_slice()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            let neighbors = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for j in neighbors.into_iter().flatten() {
                if mask.as_slice()[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.push(pixels);
    }
    out
}

fn bbox_of(pixels: &[(usize, usize)]) -> Rect {
    let x0 = pixels.iter().map(|p| p.0).min().unwrap_or(0);
    let y0 = pixels.iter().map(|p| p.1).min().unwrap_or(0);
    let x1 = pixels.iter().map(|p| p.0).max().unwrap_or(0);
    let y1 = pixels.iter().map(|p| p.1).max().unwrap_or(0);
    Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

fn make_cutout(
    image: &RgbImage,
    pixels: &[(usize, usize)],
    class: u16,
    filter: &CutoutFilter,
    report: &mut ExtractionReport,
) -> Option<ObjectCutout> {
    let bbox = bbox_of(pixels);
    if !filter.extent_ok(bbox.w, bbox.h) {
        report.rejected_extent += 1;
        return None;
    }
    if !filter.area_ok(pixels.len()) {
        report.rejected_area += 1;
        return None;
    }
    let mut alpha = Plane::filled(bbox.w, bbox.h, false);
    for &(x, y) in pixels {
        alpha.set(x - bbox.x, y - bbox.y, true);
    }
    report.accepted += 1;
    Some(ObjectCutout {
        rgb: image.crop(bbox),
        alpha,
        source_class: class,
        bbox_extent: (bbox.w, bbox.h),
        area: pixels.len(),
    })
}

/// Cut out every object of the vocabulary's object classes that passes
/// `filter`.
///
/// Instance-labeled classes yield one cutout per nonzero instance id;
/// component-labeled classes (and instance classes when `instances` is
/// `None`) yield one cutout per 4-connected component.
pub fn extract_cutouts(
    image: &RgbImage,
    sem: &SemanticMap,
    instances: Option<&Plane<u32>>,
    vocab: &ClassVocabulary,
    filter: &CutoutFilter,
) -> Result<(Vec<ObjectCutout>, ExtractionReport)> {
    check_plane_dims(sem, "semantic map", image.dims())?;
    if let Some(inst) = instances {
        check_plane_dims(inst, "instance map", image.dims())?;
    }
    let mut report = ExtractionReport::default();
    let mut cutouts = Vec::new();

    for class in &vocab.classes {
        let by_components = match (class.role, instances) {
            (ClassRole::InstanceObject, Some(inst)) => {
                let mut groups: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
                for y in 0..sem.height() {
                    for x in 0..sem.width() {
                        let id = *inst.get(x, y);
                        if *sem.get(x, y) == class.id && id != 0 {
                            groups.entry(id).or_default().push((x, y));
                        }
                    }
                }
                for pixels in groups.values() {
                    cutouts.extend(make_cutout(image, pixels, class.id, filter, &mut report));
                }
                false
            }
            (ClassRole::InstanceObject, None) => {
                let msg = format!(
                    "no instance map for instance-labeled class {} ({}); using connected components",
                    class.id, class.name
                );
                log::warn!("{msg}");
                report.warnings.push(msg);
                report.fallback_classes.push(class.id);
                true
            }
            (ClassRole::ComponentObject, _) => true,
            _ => false,
        };
        if by_components {
            let mask = sem.map(|&id| id == class.id);
            for pixels in components(&mask) {
                cutouts.extend(make_cutout(image, &pixels, class.id, filter, &mut report));
            }
        }
    }
    Ok((cutouts, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivable::ClassInfo;
    use rand::{Rng, SeedableRng};

    const PERSON: u16 = 24;
    const SIGN: u16 = 20;

    fn vocab() -> ClassVocabulary {
        ClassVocabulary {
            classes: vec![
                ClassInfo { id: 0, name: "road".into(), role: ClassRole::Road },
                ClassInfo { id: SIGN, name: "traffic sign".into(), role: ClassRole::ComponentObject },
                ClassInfo { id: PERSON, name: "person".into(), role: ClassRole::InstanceObject },
            ],
        }
    }

    fn fill(sem: &mut SemanticMap, inst: &mut Plane<u32>, r: Rect, class: u16, id: u32) {
        for y in r.y..r.y_end() {
            for x in r.x..r.x_end() {
                sem.set(x, y, class);
                inst.set(x, y, id);
            }
        }
    }

    #[test]
    fn single_person_instance_passes() {
        // 50x80 bounding box, 2000 px: a 25x78 body under a 50x1 bar.
        let mut sem = Plane::filled(200, 200, 0u16);
        let mut inst = Plane::filled(200, 200, 0u32);
        fill(&mut sem, &mut inst, Rect::new(10, 10, 50, 1), PERSON, 1);
        fill(&mut sem, &mut inst, Rect::new(10, 11, 25, 78), PERSON, 1);
        let image = RgbImage::filled(200, 200, [0.5; 3]);
        let (cutouts, report) = extract_cutouts(&image, &sem, Some(&inst), &vocab(), &CutoutFilter::default()).unwrap();
        assert_eq!(cutouts.len(), 1);
        assert_eq!(cutouts[0].bbox_extent, (50, 79));
        assert_eq!(cutouts[0].area, 2000);
        assert_eq!(report.accepted, 1);
    }

    #[test]
    fn wide_object_is_rejected() {
        let mut sem = Plane::filled(300, 100, 0u16);
        let mut inst = Plane::filled(300, 100, 0u32);
        fill(&mut sem, &mut inst, Rect::new(20, 20, 200, 40), SIGN, 0);
        let image = RgbImage::new(300, 100);
        let (cutouts, report) = extract_cutouts(&image, &sem, Some(&inst), &vocab(), &CutoutFilter::default()).unwrap();
        assert!(cutouts.is_empty());
        assert_eq!(report.rejected_extent, 1);
    }

    #[test]
    fn missing_instance_map_falls_back_with_warning() {
        let mut sem = Plane::filled(100, 100, 0u16);
        let mut inst = Plane::filled(100, 100, 0u32);
        fill(&mut sem, &mut inst, Rect::new(5, 5, 20, 20), PERSON, 3);
        fill(&mut sem, &mut inst, Rect::new(50, 50, 12, 12), PERSON, 4);
        let image = RgbImage::new(100, 100);
        let (cutouts, report) = extract_cutouts(&image, &sem, None, &vocab(), &CutoutFilter::default()).unwrap();
        assert_eq!(cutouts.len(), 2);
        assert_eq!(report.fallback_classes, vec![PERSON]);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn touching_instances_stay_separate() {
        let mut sem = Plane::filled(60, 60, 0u16);
        let mut inst = Plane::filled(60, 60, 0u32);
        fill(&mut sem, &mut inst, Rect::new(5, 5, 20, 20), PERSON, 1);
        fill(&mut sem, &mut inst, Rect::new(25, 5, 20, 20), PERSON, 2);
        let image = RgbImage::new(60, 60);
        let (cutouts, _) = extract_cutouts(&image, &sem, Some(&inst), &vocab(), &CutoutFilter::default()).unwrap();
        assert_eq!(cutouts.len(), 2);
        assert!(cutouts.iter().all(|c| c.area == 400));
    }

    /// Random rectangular blobs, accepted set checked against the thresholds
    /// applied by hand to the blob geometry.
    #[test]
    fn random_blobs_match_direct_filter() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut sem = Plane::filled(400, 400, 0u16);
            let mut inst = Plane::filled(400, 400, 0u32);
            let mut expected = Vec::new();
            for k in 0..10u32 {
                // Blobs live in disjoint 100x... cells so they never merge.
                let (cx, cy) = ((k % 4) as usize * 100, (k / 4) as usize * 130);
                let w = rng.random_range(3..=99);
                let h = rng.random_range(3..=129);
                fill(&mut sem, &mut inst, Rect::new(cx, cy, w, h), SIGN, 0);
                let ok = (10..=150).contains(&w.max(h)) && (100..=5000).contains(&(w * h));
                if ok {
                    expected.push((w, h));
                }
            }
            let image = RgbImage::new(400, 400);
            let (cutouts, report) = extract_cutouts(&image, &sem, Some(&inst), &vocab(), &CutoutFilter::default()).unwrap();
            let got: Vec<_> = cutouts.iter().map(|c| c.bbox_extent).collect();
            let mut exp_sorted = expected.clone();
            exp_sorted.sort();
            let mut got_sorted = got.clone();
            got_sorted.sort();
            assert_eq!(got_sorted, exp_sorted);
            assert_eq!(report.accepted + report.rejected_area + report.rejected_extent, 10);
        }
    }

    #[test]
    fn mirroring_flips_alpha_and_pixels() {
        let c = ObjectCutout {
            rgb: RgbImage::from_fn(3, 1, |x, _| [x as f32, 0.0, 0.0]),
            alpha: Plane::from_vec(3, 1, vec![true, false, false]).unwrap(),
            source_class: 1,
            bbox_extent: (3, 1),
            area: 1,
        };
        let m = c.mirrored();
        assert_eq!(m.alpha.as_slice(), &[false, false, true]);
        assert_eq!(m.rgb.get(0, 0)[0], 2.0);
    }
}
