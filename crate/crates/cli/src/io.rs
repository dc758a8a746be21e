//! Raster and JSON files.
//!
//! RGB images are 8-bit PNG. Label masks are 8-bit with 0 background,
//! 1 obstacle and 255 ignore; binary masks (ROI, ego vehicle) are 8-bit
//! with any nonzero value meaning set, written as 0/255. Semantic maps are
//! 8- or 16-bit single channel. Heatmaps are 16-bit single channel with
//! score = value / 65535 and a JSON sidecar.

use std::path::{Path, PathBuf};

use erasure_core::image::RoiSource;
use erasure_core::{Heatmap, LabelMask, Plane, RgbImage};
use image::{DynamicImage, ImageBuffer, Luma};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Variant;
use crate::error::{PipelineError, Result};

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| PipelineError::input(path, e.to_string()))
}

fn dims(img: &DynamicImage) -> (usize, usize) {
    (img.width() as usize, img.height() as usize)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(RgbImage::from_rgb8(&open(path)?.to_rgb8()))
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    img.to_rgb8().save(path)?;
    Ok(())
}

fn gray8(path: &Path) -> Result<Plane<u8>> {
    let img = open(path)?;
    let (w, h) = dims(&img);
    match img {
        DynamicImage::ImageLuma8(buf) => Ok(Plane::from_vec(w, h, buf.into_raw())?),
        other => Err(PipelineError::input(
            path,
            format!("expected an 8-bit single-channel image, found {:?}", other.color()),
        )),
    }
}

fn write_gray8(path: &Path, plane: &Plane<u8>) -> Result<()> {
    let (w, h) = plane.dims();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, plane.as_slice().to_vec()).expect("buffer matches dimensions");
    buf.save(path)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<LabelMask> {
    let labels = gray8(path)?;
    if let Some(v) = labels.as_slice().iter().find(|&&v| v > 1 && v != LabelMask::IGNORE) {
        return Err(PipelineError::input(path, format!("label value {v} is not 0, 1 or 255")));
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &LabelMask) -> Result<()> {
    write_gray8(path, labels)
}

pub fn read_mask(path: &Path) -> Result<Plane<bool>> {
    Ok(gray8(path)?.map(|&v| v != 0))
}

pub fn write_mask(path: &Path, mask: &Plane<bool>) -> Result<()> {
    write_gray8(path, &mask.map(|&b| if b { 255 } else { 0 }))
}

pub fn read_semantic(path: &Path) -> Result<Plane<u16>> {
    let img = open(path)?;
    let (w, h) = dims(&img);
    match img {
        DynamicImage::ImageLuma8(buf) => Ok(Plane::from_vec(w, h, buf.into_raw().into_iter().map(u16::from).collect())?),
        DynamicImage::ImageLuma16(buf) => Ok(Plane::from_vec(w, h, buf.into_raw())?),
        other => Err(PipelineError::input(
            path,
            format!("expected a single-channel class-id image, found {:?}", other.color()),
        )),
    }
}

/// Written as 8-bit when every id fits, 16-bit otherwise.
pub fn write_semantic(path: &Path, sem: &Plane<u16>) -> Result<()> {
    if sem.as_slice().iter().all(|&v| v <= u8::MAX as u16) {
        return write_gray8(path, &sem.map(|&v| v as u8));
    }
    write_gray16(path, sem)
}

fn write_gray16(path: &Path, plane: &Plane<u16>) -> Result<()> {
    let (w, h) = plane.dims();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, plane.as_slice().to_vec()).expect("buffer matches dimensions");
    buf.save(path)?;
    Ok(())
}

/// Instance ids, 16-bit; 0 means no instance.
pub fn read_instances(path: &Path) -> Result<Plane<u32>> {
    Ok(read_semantic(path)?.map(|&v| v as u32))
}

pub fn write_instances(path: &Path, inst: &Plane<u32>) -> Result<()> {
    if let Some(v) = inst.as_slice().iter().find(|&&v| v > u16::MAX as u32) {
        return Err(PipelineError::input(path, format!("instance id {v} does not fit 16 bits")));
    }
    write_gray16(path, &inst.map(|&v| v as u16))
}

pub fn quantize_score(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

pub fn read_heatmap(path: &Path) -> Result<Heatmap> {
    let img = open(path)?;
    let (w, h) = dims(&img);
    match img {
        DynamicImage::ImageLuma16(buf) => Ok(Plane::from_vec(
            w,
            h,
            buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        )?),
        other => Err(PipelineError::input(
            path,
            format!("expected a 16-bit single-channel heatmap, found {:?}", other.color()),
        )),
    }
}

pub fn write_heatmap(path: &Path, heat: &Heatmap) -> Result<()> {
    write_gray16(path, &heat.map(|&v| quantize_score(v)))
}

/// Sidecar of a heatmap file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatmapInfo {
    pub frame_id: String,
    pub roi_source: RoiSource,
    pub variant: Variant,
    pub width: usize,
    pub height: usize,
}

/// Heatmap, sidecar and (for a predicted ROI) detection ROI paths of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapFiles {
    pub heatmap: PathBuf,
    pub sidecar: PathBuf,
    pub roi: PathBuf,
}

impl HeatmapFiles {
    pub fn new(dir: &Path, id: &str) -> Self {
        Self {
            heatmap: dir.join(format!("{id}.png")),
            sidecar: dir.join(format!("{id}.json")),
            roi: dir.join(format!("{id}_roi.png")),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::input(path, e.to_string()))?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::input(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rasters_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);

        let rgb = RgbImage::from_fn(7, 5, |x, y| [x as f32 / 6.0, y as f32 / 4.0, 0.5]);
        write_rgb(&p("a.png"), &rgb).unwrap();
        let back = read_rgb(&p("a.png")).unwrap();
        assert!(back.as_slice().iter().zip(rgb.as_slice()).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0 + 1e-6));

        let labels = Plane::from_fn(7, 5, |x, _| [0u8, 1, 255][x % 3]);
        write_labels(&p("l.png"), &labels).unwrap();
        assert_eq!(read_labels(&p("l.png")).unwrap(), labels);

        let mask = Plane::from_fn(7, 5, |x, y| (x + y) % 2 == 0);
        write_mask(&p("m.png"), &mask).unwrap();
        assert_eq!(read_mask(&p("m.png")).unwrap(), mask);

        for top in [200u16, 4000] {
            let sem = Plane::from_fn(7, 5, |x, y| ((x * 5 + y) as u16 * 7) % top);
            write_semantic(&p("s.png"), &sem).unwrap();
            assert_eq!(read_semantic(&p("s.png")).unwrap(), sem);
        }

        let heat = Plane::from_fn(7, 5, |x, y| (x * 5 + y) as f32 / 34.0);
        write_heatmap(&p("h.png"), &heat).unwrap();
        let back = read_heatmap(&p("h.png")).unwrap();
        assert!(back.as_slice().iter().zip(heat.as_slice()).all(|(a, b)| (a - b).abs() <= 0.5 / 65535.0 + 1e-7));
        assert_eq!(back.as_slice()[0], 0.0);
        assert_eq!(*back.as_slice().last().unwrap(), 1.0);
    }

    #[test]
    fn wrong_raster_kinds_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rgb_path = dir.path().join("rgb.png");
        write_rgb(&rgb_path, &RgbImage::new(3, 3)).unwrap();
        assert!(read_labels(&rgb_path).is_err());
        assert!(read_heatmap(&rgb_path).is_err());
        let bad = dir.path().join("bad.png");
        write_gray8(&bad, &Plane::filled(3, 3, 7u8)).unwrap();
        assert!(read_labels(&bad).is_err());
        assert!(read_rgb(&dir.path().join("missing.png")).is_err());
    }
}
