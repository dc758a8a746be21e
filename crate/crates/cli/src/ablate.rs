//! `ablate`: run and evaluate several variants on the same frames and
//! tabulate them.

use std::fmt::Write as _;
use std::path::PathBuf;

use erasure_core::eval::MetricReport;
use serde::Serialize;

use crate::config::{PipelineConfig, Variant};
use crate::dataset::{Frames, Require};
use crate::error::{PipelineError, Result};
use crate::evaluate::evaluate_variant;
use crate::infer::infer_variants;
use crate::training::cmd_train;

pub const REFERENCE_NOTE: &str =
    "Reference full-scale result (not reproducible at desk scale): AP 81.9, FPR95 3.7 (Road Obstacles, all weather)";

#[derive(Debug, Clone)]
pub struct AblateOptions {
    /// Variants to compare; `None` means every variant the frames support.
    pub variants: Option<Vec<Variant>>,
    /// Train variants that have no checkpoint yet instead of failing.
    pub train_missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub ap: Option<f64>,
    pub fpr95: Option<f64>,
    pub tpr95_reachable: bool,
    pub positives: u64,
    pub negatives: u64,
    pub undetectable_positives: u64,
}

impl AblationRow {
    fn new(variant: Variant, r: &MetricReport) -> Self {
        Self {
            variant,
            ap: r.ap,
            fpr95: r.fpr95,
            tpr95_reachable: r.tpr95_reachable,
            positives: r.positives,
            negatives: r.negatives,
            undetectable_positives: r.undetectable_positives,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblateSummary {
    pub dir: PathBuf,
    pub rows: Vec<AblationRow>,
    pub table: String,
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}", 100.0 * v))
}

/// Fixed-width text table of the rows, followed by the reference note.
pub fn render_table(rows: &[AblationRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>7} {:>7}", "variant", "AP", "FPR95");
    for r in rows {
        let fpr = if r.fpr95.is_some() && !r.tpr95_reachable {
            format!("{}*", percent(r.fpr95))
        } else {
            percent(r.fpr95)
        };
        let _ = writeln!(s, "{:<20} {:>7} {:>7}", r.variant.name(), percent(r.ap), fpr);
    }
    if rows.iter().any(|r| r.fpr95.is_some() && !r.tpr95_reachable) {
        let _ = writeln!(s, "* 95% TPR is not reachable inside the detection ROI");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{REFERENCE_NOTE}");
    s
}

fn select_variants(cfg: &PipelineConfig, opts: &AblateOptions) -> Result<Vec<Variant>> {
    match &opts.variants {
        Some(v) if v.is_empty() => Err(PipelineError::Config("no variants to compare".into())),
        Some(v) => {
            let mut v = v.clone();
            v.sort();
            v.dedup();
            Ok(v)
        }
        None => {
            let frames = Frames::load(&cfg.paths.frames, Require { labels: false, roi: false })?;
            Ok(Variant::ALL
                .into_iter()
                .filter(|&v| {
                    let ok = v != Variant::SegmentationAlone || frames.has_semantics();
                    if !ok {
                        log::warn!("skipping {v}: the frames have no semantic maps");
                    }
                    ok
                })
                .collect())
        }
    }
}

pub fn cmd_ablate(cfg: &PipelineConfig, opts: &AblateOptions) -> Result<AblateSummary> {
    cfg.validate()?;
    let variants = select_variants(cfg, opts)?;
    if opts.train_missing {
        for &v in &variants {
            if v.needs_checkpoint() && !cfg.checkpoint_path(v).exists() {
                log::info!("training {v}");
                let mut c = cfg.clone();
                c.variant = v;
                c.paths.checkpoint = None;
                cmd_train(&c)?;
            }
        }
    }
    let inferred = infer_variants(cfg, &variants)?;
    if !inferred.failed.is_empty() {
        let ids: Vec<&str> = inferred.failed.iter().map(|f| f.id.as_str()).collect();
        return Err(PipelineError::input(
            &cfg.paths.frames,
            format!("detection failed on {}", ids.join(", ")),
        ));
    }
    let rows: Vec<AblationRow> = variants
        .iter()
        .map(|&v| Ok(AblationRow::new(v, &evaluate_variant(cfg, v)?.report.pooled)))
        .collect::<Result<_>>()?;

    let dir = cfg.paths.output.join("ablation");
    std::fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("ablation.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let table = render_table(&rows);
    std::fs::write(dir.join("ablation.txt"), &table)?;
    Ok(AblateSummary {
        dir,
        rows,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_marks_unreachable_fpr_and_ends_with_reference() {
        let rows = vec![
            AblationRow {
                variant: Variant::Full,
                ap: Some(0.8123),
                fpr95: Some(0.037),
                tpr95_reachable: true,
                positives: 10,
                negatives: 90,
                undetectable_positives: 0,
            },
            AblationRow {
                variant: Variant::NoDiscrepancy,
                ap: None,
                fpr95: Some(1.0),
                tpr95_reachable: false,
                positives: 10,
                negatives: 90,
                undetectable_positives: 3,
            },
        ];
        let t = render_table(&rows);
        assert!(t.contains("full                    81.2     3.7"));
        assert!(t.contains("no_discrepancy           n/a  100.0*"));
        assert!(t.trim_end().ends_with(REFERENCE_NOTE));
    }
}
