//! Procedural "toy roads" for desk-scale runs.
//!
//! A scene is a perspective road (with sidewalks and lane markings) under a
//! sky with buildings, flanked by grass. Roads vary in gray level and
//! texture: smooth, rough, cobbled or patched. Off-road objects (vehicles,
//! people, signs) are drawn with semantic and instance labels so that the
//! regular cutout extraction can harvest them. Test frames additionally
//! get geometric obstacles planted on the road, with ground-truth labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drivable::{ClassInfo, ClassRole, ClassVocabulary, SemanticMap};
use crate::image::{LabelMask, Plane, RgbImage};
use crate::synth::augment::lattice_noise;

pub mod classes {
    pub const ROAD: u16 = 0;
    pub const SIDEWALK: u16 = 1;
    pub const GRASS: u16 = 2;
    pub const BUILDING: u16 = 3;
    pub const SKY: u16 = 4;
    pub const VEHICLE: u16 = 10;
    pub const PERSON: u16 = 11;
    pub const SIGN: u16 = 12;
    /// Planted obstacles, when the simulated segmentation notices them.
    pub const UNKNOWN: u16 = 20;
}

pub fn toy_vocabulary() -> ClassVocabulary {
    use classes::*;
    let c = |id, name: &str, role| ClassInfo {
        id,
        name: name.to_string(),
        role,
    };
    ClassVocabulary {
        classes: vec![
            c(ROAD, "road", ClassRole::Road),
            c(SIDEWALK, "sidewalk", ClassRole::Sidewalk),
            c(GRASS, "grass", ClassRole::Other),
            c(BUILDING, "building", ClassRole::Other),
            c(SKY, "sky", ClassRole::Other),
            c(VEHICLE, "vehicle", ClassRole::InstanceObject),
            c(PERSON, "person", ClassRole::InstanceObject),
            c(SIGN, "traffic sign", ClassRole::ComponentObject),
            c(UNKNOWN, "unknown", ClassRole::Other),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub width: usize,
    pub height: usize,
    pub min_scene_objects: usize,
    pub max_scene_objects: usize,
    pub min_obstacles: usize,
    pub max_obstacles: usize,
    /// Side range of planted obstacles, in pixels.
    pub min_obstacle_side: usize,
    pub max_obstacle_side: usize,
    /// Probability that the simulated segmentation labels a planted obstacle
    /// as road.
    pub missed_by_segmentation: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 128,
            min_scene_objects: 3,
            max_scene_objects: 6,
            min_obstacles: 1,
            max_obstacles: 4,
            min_obstacle_side: 6,
            max_obstacle_side: 22,
            missed_by_segmentation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyScene {
    pub image: RgbImage,
    pub semantic: SemanticMap,
    pub instances: Plane<u32>,
    /// Ground-truth drivable area (road and sidewalk geometry).
    pub roi: Plane<bool>,
    pub labels: LabelMask,
}

#[derive(Debug, Clone, Copy)]
enum Texture {
    Smooth,
    Rough,
    Cobbled,
    Patched,
}

struct RoadGeometry {
    horizon: usize,
    cx_top: f32,
    cx_bottom: f32,
    half_top: f32,
    half_bottom: f32,
    walk_top: f32,
    walk_bottom: f32,
    height: usize,
}

impl RoadGeometry {
    fn t(&self, y: usize) -> Option<f32> {
        (y >= self.horizon).then(|| (y - self.horizon) as f32 / (self.height - 1 - self.horizon).max(1) as f32)
    }

    fn at(&self, y: usize) -> Option<(f32, f32, f32, f32)> {
        self.t(y).map(|t| {
            let lerp = |a: f32, b: f32| a + (b - a) * t;
            (
                lerp(self.cx_top, self.cx_bottom),
                lerp(self.half_top, self.half_bottom),
                lerp(self.walk_top, self.walk_bottom),
                t,
            )
        })
    }

    fn class_at(&self, x: usize, y: usize) -> u16 {
        match self.at(y) {
            None => classes::SKY,
            Some((cx, half, walk, _)) => {
                let d = (x as f32 + 0.5 - cx).abs();
                if d <= half {
                    classes::ROAD
                } else if d <= half + walk {
                    classes::SIDEWALK
                } else {
                    classes::GRASS
                }
            }
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: [f32; 3], amount: f32) -> [f32; 3] {
    base.map(|v| (v + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

fn random_color(rng: &mut ChaCha8Rng) -> [f32; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn scale(c: [f32; 3], k: f32) -> [f32; 3] {
    c.map(|v| (v * k).clamp(0.0, 1.0))
}

/// Pixel-set painter that tracks semantic class and instance id.
struct Canvas<'a> {
    image: &'a mut RgbImage,
    semantic: &'a mut SemanticMap,
    instances: &'a mut Plane<u32>,
}

impl Canvas<'_> {
    fn put(&mut self, x: usize, y: usize, rgb: [f32; 3], class: u16, instance: u32) {
        self.image.set(x, y, rgb);
        self.semantic.set(x, y, class);
        self.instances.set(x, y, instance);
    }
}

/// Local-coordinate shape mask of size `w × h`, plus per-pixel color.
type Sprite = (Plane<bool>, RgbImage);

fn vehicle_sprite(rng: &mut ChaCha8Rng) -> Sprite {
    let w = rng.random_range(16..=40);
    let h = rng.random_range(10..=22);
    let body = random_color(rng);
    let glass = [0.12, 0.14, 0.18];
    let wheel = [0.05; 3];
    let cabin_top = h / 3;
    let mask = Plane::from_fn(w, h, |x, y| y >= cabin_top || (x >= w / 5 && x < w - w / 5));
    let colors = RgbImage::from_fn(w, h, |x, y| {
        if y < cabin_top + h / 4 && x > w / 5 + 1 && x + 2 < w - w / 5 && y > 0 {
            glass
        } else if y + 3 >= h && (x % (w / 2).max(1) < w / 4) {
            wheel
        } else {
            scale(body, 1.0 - 0.3 * y as f32 / h as f32)
        }
    });
    (mask, colors)
}

fn person_sprite(rng: &mut ChaCha8Rng) -> Sprite {
    let w = rng.random_range(7..=12);
    let h = rng.random_range(18..=32);
    let skin = jitter(rng, [0.8, 0.6, 0.5], 0.15);
    let shirt = random_color(rng);
    let pants = scale(random_color(rng), 0.5);
    let head = w as f32 / 2.0;
    let mask = Plane::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f32 + 0.5 - head, y as f32 + 0.5 - head);
        if (y as f32) < 2.0 * head {
            fx * fx + fy * fy <= head * head
        } else {
            true
        }
    });
    let colors = RgbImage::from_fn(w, h, |_, y| {
        if (y as f32) < 2.0 * head {
            skin
        } else if y < (2.0 * head) as usize + (h - (2.0 * head) as usize) / 2 {
            shirt
        } else {
            pants
        }
    });
    (mask, colors)
}

fn sign_sprite(rng: &mut ChaCha8Rng) -> Sprite {
    let r = rng.random_range(5..=9usize);
    let pole = rng.random_range(6..=12usize);
    let (w, h) = (2 * r + 1, 2 * r + 1 + pole);
    let face = [[0.85, 0.1, 0.1], [0.1, 0.25, 0.8], [0.95, 0.8, 0.1]][rng.random_range(0..3)];
    let c = r as f32 + 0.5;
    let mask = Plane::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f32 + 0.5 - c, y as f32 + 0.5 - c);
        fx * fx + fy * fy <= c * c || (y >= 2 * r && x.abs_diff(r) <= 1)
    });
    let colors = RgbImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f32 + 0.5 - c, y as f32 + 0.5 - c);
        let d = (fx * fx + fy * fy).sqrt();
        if y > 2 * r {
            [0.45; 3]
        } else if d < c * 0.55 {
            [0.95; 3]
        } else {
            face
        }
    });
    (mask, colors)
}

fn obstacle_sprite(rng: &mut ChaCha8Rng, cfg: &ToyConfig) -> Sprite {
    let w = rng.random_range(cfg.min_obstacle_side..=cfg.max_obstacle_side);
    let h = rng.random_range(cfg.min_obstacle_side..=cfg.max_obstacle_side);
    let base = random_color(rng);
    let shape = rng.random_range(0..3);
    let mask = Plane::from_fn(w, h, |x, y| {
        let (fx, fy) = ((x as f32 + 0.5) / w as f32, (y as f32 + 0.5) / h as f32);
        match shape {
            0 => true,
            1 => (fx - 0.5).powi(2) + (fy - 0.5).powi(2) <= 0.25,
            _ => (fx - 0.5).abs() <= 0.5 * fy,
        }
    });
    let colors = RgbImage::from_fn(w, h, |x, y| {
        let shade = 1.0 - 0.35 * y as f32 / h as f32 + 0.05 * ((x + y) % 3) as f32;
        scale(base, shade)
    });
    (mask, colors)
}

fn draw_background(rng: &mut ChaCha8Rng, cfg: &ToyConfig) -> (RgbImage, SemanticMap, RoadGeometry) {
    let (w, h) = (cfg.width, cfg.height);
    let wf = w as f32;
    let geo = RoadGeometry {
        horizon: (h as f32 * rng.random_range(0.30..0.42)) as usize,
        cx_top: wf * (0.5 + rng.random_range(-0.06..0.06)),
        cx_bottom: wf * (0.5 + rng.random_range(-0.12..0.12)),
        half_top: wf * rng.random_range(0.03..0.07),
        half_bottom: wf * rng.random_range(0.30..0.46),
        walk_top: 1.0,
        walk_bottom: rng.random_range(6.0..14.0),
        height: h,
    };

    let gray = rng.random_range(0.28..0.58f32);
    let road_base = jitter(rng, [gray; 3], 0.03);
    let texture = match rng.random_range(0..4) {
        0 => Texture::Smooth,
        1 => Texture::Rough,
        2 => Texture::Cobbled,
        _ => Texture::Patched,
    };
    let fine_sigma = match texture {
        Texture::Smooth => 0.01,
        Texture::Rough => 0.035,
        _ => 0.02,
    };
    let rough = lattice_noise(w, h, 6, if matches!(texture, Texture::Rough) { 0.05 } else { 0.015 }, rng);
    let cobble_period = rng.random_range(4.0..9.0f32);
    let patches: Vec<(f32, f32, f32, f32, f32)> = if matches!(texture, Texture::Patched) {
        (0..rng.random_range(2..=5))
            .map(|_| {
                (
                    rng.random_range(0.0..wf),
                    rng.random_range(geo.horizon as f32..h as f32),
                    rng.random_range(6.0..30.0),
                    rng.random_range(4.0..14.0),
                    rng.random_range(-0.08..0.08),
                )
            })
            .collect()
    } else {
        Vec::new()
    };
    let center_line = rng.random_bool(0.8);
    let edge_lines = rng.random_bool(0.5);
    let marking = if rng.random_bool(0.7) { [0.92, 0.92, 0.9] } else { [0.88, 0.76, 0.2] };
    let walk_base = jitter(rng, [0.66, 0.64, 0.6], 0.05);
    let grass_base = jitter(rng, [0.22, 0.45, 0.16], 0.05);
    let grass_noise = lattice_noise(w, h, 4, 0.06, rng);
    let fine: Vec<f32> = (0..w * h).map(|_| rng.random_range(-1.0..1.0f32) * fine_sigma * 1.7).collect();

    let mut image = RgbImage::new(w, h);
    let mut semantic = Plane::filled(w, h, classes::SKY);
    for y in 0..h {
        for x in 0..w {
            let class = geo.class_at(x, y);
            let i = y * w + x;
            let px = match (class, geo.at(y)) {
                (classes::ROAD, Some((cx, half, _, t))) => {
                    let mut v = fine[i] + rough.as_slice()[i];
                    if matches!(texture, Texture::Cobbled) {
                        let p = cobble_period * (0.4 + t);
                        v += 0.05 * (x as f32 / p * std::f32::consts::TAU).sin() * (y as f32 / p * std::f32::consts::TAU).sin();
                    }
                    for &(px, py, pw, ph, dv) in &patches {
                        if (x as f32 - px).abs() < pw / 2.0 && (y as f32 - py).abs() < ph / 2.0 {
                            v += dv;
                        }
                    }
                    let line_w = 0.6 + 1.8 * t;
                    let dash = 3.0 + 10.0 * t;
                    let off = x as f32 + 0.5 - cx;
                    let on_center = center_line
                        && off.abs() <= line_w
                        && (((y - geo.horizon) as f32 / dash) as usize).is_multiple_of(2);
                    let on_edge = edge_lines && (off.abs() - (half - 2.0 - line_w)).abs() <= line_w * 0.7;
                    if on_center || on_edge {
                        marking.map(|m| (m + fine[i]).clamp(0.0, 1.0))
                    } else {
                        road_base.map(|b| (b + v).clamp(0.0, 1.0))
                    }
                }
                (classes::SIDEWALK, _) => walk_base.map(|b| (b + fine[i]).clamp(0.0, 1.0)),
                (classes::GRASS, _) => grass_base.map(|b| (b + grass_noise.as_slice()[i]).clamp(0.0, 1.0)),
                _ => {
                    let t = y as f32 / geo.horizon.max(1) as f32;
                    [0.55 + 0.25 * t, 0.7 + 0.15 * t, 0.92]
                }
            };
            image.set(x, y, px);
            semantic.set(x, y, class);
        }
    }

    for _ in 0..rng.random_range(3..=7) {
        let bw = rng.random_range(12..=48usize);
        let bh = rng.random_range(4..=geo.horizon.max(5));
        let bx = rng.random_range(0..w);
        let color = jitter(rng, [0.5, 0.45, 0.42], 0.2);
        for y in geo.horizon.saturating_sub(bh)..geo.horizon {
            for x in bx..(bx + bw).min(w) {
                let window = (x - bx) % 6 < 2 && (geo.horizon - y) % 5 < 2;
                image.set(x, y, if window { scale(color, 0.6) } else { color });
                semantic.set(x, y, classes::BUILDING);
            }
        }
    }
    (image, semantic, geo)
}

/// Place a sprite at a random position where `allowed` holds under every
/// shape pixel. Returns the top-left corner.
fn place(rng: &mut ChaCha8Rng, sprite: &Sprite, dims: (usize, usize), allowed: impl Fn(usize, usize) -> bool) -> Option<(usize, usize)> {
    let (sw, sh) = sprite.0.dims();
    if sw >= dims.0 || sh >= dims.1 {
        return None;
    }
    (0..100).find_map(|_| {
        let x = rng.random_range(0..=dims.0 - sw);
        let y = rng.random_range(0..=dims.1 - sh);
        let ok = (0..sh).all(|sy| (0..sw).all(|sx| !*sprite.0.get(sx, sy) || allowed(x + sx, y + sy)));
        ok.then_some((x, y))
    })
}

fn stamp(canvas: &mut Canvas<'_>, sprite: &Sprite, at: (usize, usize), class: u16, instance: u32) {
    let (mask, colors) = sprite;
    for sy in 0..mask.height() {
        for sx in 0..mask.width() {
            if *mask.get(sx, sy) {
                canvas.put(at.0 + sx, at.1 + sy, colors.get(sx, sy), class, instance);
            }
        }
    }
}

/// A clean road scene with labeled off-road objects.
pub fn generate_scene(seed: u64, cfg: &ToyConfig) -> ToyScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scene_with_rng(&mut rng, cfg)
}

fn scene_with_rng(rng: &mut ChaCha8Rng, cfg: &ToyConfig) -> ToyScene {
    let (mut image, mut semantic, _) = draw_background(rng, cfg);
    let dims = (cfg.width, cfg.height);
    let roi = semantic.map(|&c| c == classes::ROAD || c == classes::SIDEWALK);
    let mut instances = Plane::filled(cfg.width, cfg.height, 0u32);

    let count = rng.random_range(cfg.min_scene_objects..=cfg.max_scene_objects.max(cfg.min_scene_objects));
    let mut next_instance = 1u32;
    for _ in 0..count {
        let (sprite, class) = match rng.random_range(0..3) {
            0 => (vehicle_sprite(rng), classes::VEHICLE),
            1 => (person_sprite(rng), classes::PERSON),
            _ => (sign_sprite(rng), classes::SIGN),
        };
        let free = |x: usize, y: usize| matches!(*semantic.get(x, y), classes::GRASS | classes::BUILDING | classes::SKY);
        if let Some(at) = place(rng, &sprite, dims, free) {
            let instance = if class == classes::SIGN { 0 } else { next_instance };
            let mut canvas = Canvas {
                image: &mut image,
                semantic: &mut semantic,
                instances: &mut instances,
            };
            stamp(&mut canvas, &sprite, at, class, instance);
            next_instance += 1;
        }
    }

    let labels = roi.map(|&r| if r { LabelMask::BACKGROUND } else { LabelMask::IGNORE });
    ToyScene {
        image,
        semantic,
        instances,
        roi,
        labels,
    }
}

/// A scene with geometric obstacles planted inside the drivable area and
/// labeled as such.
pub fn generate_test_frame(seed: u64, cfg: &ToyConfig) -> ToyScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = scene_with_rng(&mut rng, cfg);
    let dims = (cfg.width, cfg.height);
    let count = rng.random_range(cfg.min_obstacles..=cfg.max_obstacles.max(cfg.min_obstacles));
    for _ in 0..count {
        let sprite = obstacle_sprite(&mut rng, cfg);
        let roi = &scene.roi;
        let Some(at) = place(&mut rng, &sprite, dims, |x, y| *roi.get(x, y)) else {
            continue;
        };
        let missed = rng.random_bool(cfg.missed_by_segmentation);
        let (mask, colors) = &sprite;
        for sy in 0..mask.height() {
            for sx in 0..mask.width() {
                if *mask.get(sx, sy) {
                    let (x, y) = (at.0 + sx, at.1 + sy);
                    scene.image.set(x, y, colors.get(sx, sy));
                    if !missed {
                        scene.semantic.set(x, y, classes::UNKNOWN);
                    }
                    scene.labels.set(x, y, LabelMask::OBSTACLE);
                }
            }
        }
    }
    scene
}
