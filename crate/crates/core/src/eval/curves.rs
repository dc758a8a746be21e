use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::MetricReport;

pub const MAX_CURVE_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// ROC point; the leading origin has no threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

/// Evenly thinned copy of `points` with at most `max` entries that always
/// keeps the first, the last and the `key` point.
pub fn downsample<T: Clone>(points: &[T], max: usize, key: Option<usize>) -> Vec<T> {
    let n = points.len();
    if n <= max || max < 3 {
        return points.to_vec();
    }
    let mut keep: Vec<usize> = key.into_iter().filter(|&k| k < n).collect();
    let budget = max - keep.len();
    keep.extend((0..budget).map(|i| i * (n - 1) / (budget - 1)));
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| points[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveFiles {
    pub pr_csv: PathBuf,
    pub roc_csv: PathBuf,
    pub plot: PathBuf,
}

/// Write `<stem>_pr.csv`, `<stem>_roc.csv` and `<stem>_curves.png` into
/// `dir`.
pub fn export_curves(report: &MetricReport, dir: &Path, stem: &str) -> Result<CurveFiles> {
    let files = CurveFiles {
        pr_csv: dir.join(format!("{stem}_pr.csv")),
        roc_csv: dir.join(format!("{stem}_roc.csv")),
        plot: dir.join(format!("{stem}_curves.png")),
    };
    let mut pr = csv::Writer::from_path(&files.pr_csv)?;
    for p in &report.pr_curve {
        pr.serialize(p)?;
    }
    pr.flush()?;
    let mut roc = csv::Writer::from_path(&files.roc_csv)?;
    for p in &report.roc_curve {
        roc.serialize(p)?;
    }
    roc.flush()?;
    render_plot(report).save(&files.plot)?;
    Ok(files)
}

const PANEL: u32 = 300;
const MARGIN: u32 = 24;

struct Canvas {
    img: ::image::RgbImage,
}

impl Canvas {
    fn plot_xy(&self, panel: u32, x: f64, y: f64) -> (f64, f64) {
        let left = MARGIN + panel * (PANEL + 2 * MARGIN);
        (
            left as f64 + x.clamp(0.0, 1.0) * PANEL as f64,
            (MARGIN + PANEL) as f64 - y.clamp(0.0, 1.0) * PANEL as f64,
        )
    }

    fn dot(&mut self, x: f64, y: f64, color: [u8; 3]) {
        let (x, y) = (x.round() as i64, y.round() as i64);
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, ::image::Rgb(color));
        }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
        let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            self.dot(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t, color);
        }
    }

    fn frame(&mut self, panel: u32) {
        let grid = [225, 225, 225];
        for k in 1..10 {
            let v = k as f64 / 10.0;
            self.line(self.plot_xy(panel, v, 0.0), self.plot_xy(panel, v, 1.0), grid);
            self.line(self.plot_xy(panel, 0.0, v), self.plot_xy(panel, 1.0, v), grid);
        }
        let axis = [60, 60, 60];
        let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)];
        for w in corners.windows(2) {
            self.line(self.plot_xy(panel, w[0].0, w[0].1), self.plot_xy(panel, w[1].0, w[1].1), axis);
        }
    }

    fn polyline(&mut self, panel: u32, pts: impl Iterator<Item = (f64, f64)>, color: [u8; 3]) {
        let mut prev: Option<(f64, f64)> = None;
        for (x, y) in pts {
            let p = self.plot_xy(panel, x, y);
            match prev {
                Some(q) => self.line(q, p, color),
                None => self.dot(p.0, p.1, color),
            }
            prev = Some(p);
        }
    }

    fn marker(&mut self, panel: u32, x: f64, y: f64, color: [u8; 3]) {
        let (cx, cy) = self.plot_xy(panel, x, y);
        for d in -3..=3 {
            self.dot(cx + d as f64, cy, color);
            self.dot(cx, cy + d as f64, color);
        }
    }
}

/// Precision–recall (left) and ROC (right) on unit axes with a 0.1 grid.
/// The FPR95 operating point is marked on the ROC panel.
fn render_plot(report: &MetricReport) -> ::image::RgbImage {
    let width = 2 * (PANEL + 2 * MARGIN);
    let height = PANEL + 2 * MARGIN;
    let mut c = Canvas {
        img: ::image::RgbImage::from_pixel(width, height, ::image::Rgb([255, 255, 255])),
    };
    c.frame(0);
    c.frame(1);
    c.polyline(0, report.pr_curve.iter().map(|p| (p.recall, p.precision)), [31, 119, 180]);
    c.polyline(1, report.roc_curve.iter().map(|p| (p.fpr, p.tpr)), [214, 39, 40]);
    if let (Some(fpr), true) = (report.fpr95, report.tpr95_reachable) {
        let tpr = report
            .roc_curve
            .iter()
            .find(|p| p.fpr == fpr && p.tpr >= crate::eval::TPR_TARGET)
            .map_or(crate::eval::TPR_TARGET, |p| p.tpr);
        c.marker(1, fpr, tpr, [0, 0, 0]);
    }
    c.img
}
