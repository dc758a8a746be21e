//! Drivable-area ROI from a semantic class map.
//!
//! The ROI is every road or sidewalk pixel, plus every 4-connected group of
//! other pixels that is completely surrounded by road (i.e. does not reach
//! the image border), minus the ego-vehicle mask. The enclosed groups on
//! their own are the segmentation-only obstacle detector.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_plane_dims, Heatmap, Plane, RoiMask, RoiSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassRole {
    Road,
    Sidewalk,
    /// Object class whose instances come from an instance-id map.
    InstanceObject,
    /// Object class without instance ids; instances are connected components.
    ComponentObject,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: u16,
    pub name: String,
    #[serde(default)]
    pub role: ClassRole,
}

/// The class-id vocabulary of a semantic map (the JSON sidecar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVocabulary {
    pub classes: Vec<ClassInfo>,
}

impl ClassVocabulary {
    pub fn ids_with(&self, pred: impl Fn(ClassRole) -> bool) -> Vec<u16> {
        self.classes.iter().filter(|c| pred(c.role)).map(|c| c.id).collect()
    }

    /// Road and sidewalk ids.
    pub fn drivable_ids(&self) -> Vec<u16> {
        self.ids_with(|r| matches!(r, ClassRole::Road | ClassRole::Sidewalk))
    }

    pub fn name_of(&self, id: u16) -> Option<&str> {
        self.classes.iter().find(|c| c.id == id).map(|c| c.name.as_str())
    }

    pub fn role_of(&self, id: u16) -> Option<ClassRole> {
        self.classes.iter().find(|c| c.id == id).map(|c| c.role)
    }

    /// Fail on the first pixel whose id is not declared.
    pub fn validate(&self, map: &SemanticMap) -> Result<()> {
        let mut known = [false; 1 << 16];
        for c in &self.classes {
            known[c.id as usize] = true;
        }
        for y in 0..map.height() {
            for x in 0..map.width() {
                let id = *map.get(x, y);
                if !known[id as usize] {
                    return Err(Error::UnknownClass { id, x, y });
                }
            }
        }
        Ok(())
    }
}

/// Per-pixel class ids.
pub type SemanticMap = Plane<u16>;

fn road_mask(sem: &SemanticMap, road_ids: &[u16]) -> Result<Plane<bool>> {
    if road_ids.is_empty() {
        return Err(Error::InvalidParameter("road class id list is empty".into()));
    }
    Ok(sem.map(|id| road_ids.contains(id)))
}

/// Non-road pixels whose 4-connected non-road component stays off the
/// image border.
pub fn enclosed_non_road(sem: &SemanticMap, road_ids: &[u16]) -> Result<Plane<bool>> {
    let road = road_mask(sem, road_ids)?;
    let (w, h) = road.dims();
    let mut label = vec![u32::MAX; w * h];
    let mut enclosed_by_label: Vec<bool> = Vec::new();
    let mut queue = VecDeque::new();
    let mut members = Vec::new();

    for start in 0..w * h {
        if road.as_slice()[start] || label[start] != u32::MAX {
            continue;
        }
        let id = enclosed_by_label.len() as u32;
        let mut touches_border = false;
        label[start] = id;
        queue.push_back(start);
        members.clear();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                touches_border = true;
            }
            let neighbors = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for j in neighbors.into_iter().flatten() {
                if !road.as_slice()[j] && label[j] == u32::MAX {
                    label[j] = id;
                    queue.push_back(j);
                }
            }
        }
        enclosed_by_label.push(!touches_border);
    }

    let data = label
        .iter()
        .map(|&l| l != u32::MAX && enclosed_by_label[l as usize])
        .collect();
    Plane::from_vec(w, h, data)
}

/// Road ∪ sidewalk ∪ enclosed non-road islands, minus the ego vehicle.
pub fn derive_roi(
    sem: &SemanticMap,
    road_ids: &[u16],
    ego_mask: Option<&Plane<bool>>,
    source: RoiSource,
) -> Result<RoiMask> {
    let road = road_mask(sem, road_ids)?;
    let enclosed = enclosed_non_road(sem, road_ids)?;
    if let Some(ego) = ego_mask {
        check_plane_dims(ego, "ego mask", sem.dims())?;
    }
    let mask = Plane::from_fn(sem.width(), sem.height(), |x, y| {
        let inside = *road.get(x, y) || *enclosed.get(x, y);
        inside && !ego_mask.is_some_and(|e| *e.get(x, y))
    });
    Ok(RoiMask::new(mask, source))
}

/// Segmentation-only detector: 1 on enclosed non-road islands inside the
/// ROI, 0 elsewhere.
pub fn segmentation_alone_score(
    sem: &SemanticMap,
    road_ids: &[u16],
    ego_mask: Option<&Plane<bool>>,
) -> Result<Heatmap> {
    let roi = derive_roi(sem, road_ids, ego_mask, RoiSource::Predicted)?;
    let enclosed = enclosed_non_road(sem, road_ids)?;
    Ok(Plane::from_fn(sem.width(), sem.height(), |x, y| {
        if *roi.get(x, y) && *enclosed.get(x, y) {
            1.0
        } else {
            0.0
        }
    }))
}
