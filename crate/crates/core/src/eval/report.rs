use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{masked_psnr, precision_recall_f1, psnr, SegMetrics};
use super::ssim::ssim;
use crate::error::{Error, Result};
use crate::image::png_io::load_mask_png;
use crate::image::{load_any, DPFrame, DisparityAxis, Image};
use crate::synth::{DatasetManifest, SampleRecord};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub id: String,
    pub segmentation: SegMetrics,
    /// Restored vs clean combined image, when a restoration was supplied.
    pub restored: Option<QualityMetrics>,
    /// PSNR over the ground-truth fence pixels only.
    pub restored_masked_psnr: Option<f64>,
    /// Occluded input vs clean, for reference.
    pub occluded: QualityMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub samples: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Means over the samples that have a restoration.
    pub restored_samples: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub masked_psnr: Option<f64>,
    pub occluded_psnr: f64,
    pub occluded_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub psnr_definition: String,
    pub ssim_definition: String,
    pub samples: Vec<SampleEval>,
    pub mean: MeanMetrics,
}

fn stored(frame: DPFrame, axis: DisparityAxis) -> DPFrame {
    match axis {
        DisparityAxis::Horizontal => frame,
        DisparityAxis::Vertical => frame.transpose(),
    }
}

fn restored_path(dir: &Path) -> Option<PathBuf> {
    ["restored.pfm", "restored.png"].iter().map(|n| dir.join(n)).find(|p| p.exists())
}

fn evaluate_sample(rec: &SampleRecord, root: &Path, pred_dir: &Path) -> Result<SampleEval> {
    let dir = pred_dir.join(&rec.id);
    let gt = load_mask_png(&root.join(&rec.files.mask))?;
    let pred = load_mask_png(&dir.join("mask.png"))?;
    let segmentation = precision_recall_f1(&pred, &gt)?;
    let (clean, axis) = DPFrame::load_dir(&root.join(&rec.files.clean))?;
    let clean = stored(clean, axis).combined;
    let (occ, axis) = DPFrame::load_dir(&root.join(&rec.files.occluded))?;
    let occ = stored(occ, axis).combined;
    let quality = |img: &Image| -> Result<QualityMetrics> { Ok(QualityMetrics { psnr: psnr(img, &clean, 1.0)?, ssim: ssim(img, &clean)? }) };
    let occluded = quality(&occ)?;
    let (restored, restored_masked_psnr) = match restored_path(&dir) {
        Some(p) => {
            let img = load_any(&p)?;
            (Some(quality(&img)?), masked_psnr(&img, &clean, &gt, 1.0)?)
        }
        None => (None, None),
    };
    Ok(SampleEval { id: rec.id.clone(), segmentation, restored, restored_masked_psnr, occluded })
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl MeanMetrics {
    fn of(samples: &[SampleEval]) -> Self {
        let restored: Vec<QualityMetrics> = samples.iter().filter_map(|s| s.restored).collect();
        Self {
            samples: samples.len(),
            precision: mean(samples.iter().map(|s| s.segmentation.precision)).unwrap_or(0.0),
            recall: mean(samples.iter().map(|s| s.segmentation.recall)).unwrap_or(0.0),
            f1: mean(samples.iter().map(|s| s.segmentation.f1)).unwrap_or(0.0),
            restored_samples: restored.len(),
            psnr: mean(restored.iter().map(|q| q.psnr)),
            ssim: mean(restored.iter().map(|q| q.ssim)),
            masked_psnr: mean(samples.iter().filter_map(|s| s.restored_masked_psnr)),
            occluded_psnr: mean(samples.iter().map(|s| s.occluded.psnr)).unwrap_or(0.0),
            occluded_ssim: mean(samples.iter().map(|s| s.occluded.ssim)).unwrap_or(0.0),
        }
    }
}

/// Scores the predictions in `pred_dir/<sample id>/` (a binary `mask.png`,
/// and optionally `restored.png` or `restored.pfm`) against every record
/// of a dataset manifest rooted at `root`.
///
/// Samples are evaluated in parallel; the report keeps manifest order.
/// Missing masks are collected and reported together.
pub fn evaluate_dataset(manifest: &DatasetManifest, root: &Path, pred_dir: &Path) -> Result<EvalReport> {
    let missing: Vec<String> = manifest
        .records
        .iter()
        .filter(|r| !pred_dir.join(&r.id).join("mask.png").exists())
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let samples: Vec<SampleEval> =
        manifest.records.par_iter().map(|r| evaluate_sample(r, root, pred_dir)).collect::<Result<_>>()?;
    let mean = MeanMetrics::of(&samples);
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        psnr_definition: "joint over RGB, peak 1.0, identical images capped at 99 dB".into(),
        ssim_definition: "11x11 Gaussian window (sigma 1.5), C1=(0.01)^2, C2=(0.03)^2, valid windows, mean over channels".into(),
        samples,
        mean,
    })
}

impl EvalReport {
    /// Fixed-width table: segmentation columns, then restoration columns.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<24} {:>9} {:>9} {:>9} | {:>9} {:>9} {:>11}",
            "sample", "Precision", "Recall", "F1", "PSNR", "SSIM", "PSNR(mask)"
        );
        let _ = writeln!(s, "{}", "-".repeat(88));
        let mut row = |id: &str, p: f64, r: f64, f: f64, q: Option<f64>, ss: Option<f64>, m: Option<f64>| {
            let _ = writeln!(
                s,
                "{:<24} {:>9.4} {:>9.4} {:>9.4} | {:>9} {:>9} {:>11}",
                id,
                p,
                r,
                f,
                opt(q, 2),
                opt(ss, 4),
                opt(m, 2)
            );
        };
        for e in &self.samples {
            let g = &e.segmentation;
            row(&e.id, g.precision, g.recall, g.f1, e.restored.map(|q| q.psnr), e.restored.map(|q| q.ssim), e.restored_masked_psnr);
        }
        let m = &self.mean;
        row("mean", m.precision, m.recall, m.f1, m.psnr, m.ssim, m.masked_psnr);
        let _ = writeln!(s, "occluded input: PSNR {:.2}, SSIM {:.4}", m.occluded_psnr, m.occluded_ssim);
        s
    }
}
