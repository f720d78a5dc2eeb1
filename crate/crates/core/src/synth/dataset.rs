//! Dataset generation, manifests and patch extraction.
//!
//! Output layout (all paths in the manifest are relative to it):
//!
//! ```text
//! manifest.json
//! samples/<id>/occluded/{left,right,combined}.pfm, frame.json
//! samples/<id>/clean/{left,right,combined}.pfm, frame.json
//! samples/<id>/mask_soft.pfm      soft ground truth (combined-view blurred mask)
//! samples/<id>/mask.png           binary ground truth (soft >= 0.5)
//! patches/<id>_<k>/...            same layout, training split only, if enabled
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FenceAsset, SampleProvenance, SynthSample, Synthesizer, SynthConfig};
use crate::error::{io_err, Error, Result};
use crate::hashing::sha256_hex;
use crate::image::pfm::{load_pfm, save_pfm};
use crate::image::png_io::{load_mask_png, save_mask_png};
use crate::image::{load_any, DPFrame, DisparityAxis, MaskImage};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

const SPLIT_RULE: &str =
    "n_test = round(n * 100 / 904) (ties away from zero); the last n_test sample indices form the test split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub size: usize,
    pub stride: usize,
}

impl Default for PatchConfig {
    /// 512 px patches at stride 376: 15 patches per 2016x1536 frame.
    fn default() -> Self {
        Self { size: 512, stride: 376 }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.stride == 0 {
            return Err(Error::InvalidArgument("patch size and stride must be > 0".into()));
        }
        Ok(())
    }
}

/// Number of `patch x patch` windows at `stride` in a `w x h` frame.
pub fn patch_count(w: usize, h: usize, patch: usize, stride: usize) -> Result<usize> {
    PatchConfig { size: patch, stride }.validate()?;
    if patch > w || patch > h {
        return Err(Error::Dimensions(format!("patch {patch} larger than {w}x{h} frame")));
    }
    Ok(((h - patch) / stride + 1) * ((w - patch) / stride + 1))
}

/// Top-left corners of all windows, row-major.
pub fn patch_windows(w: usize, h: usize, patch: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    patch_count(w, h, patch, stride)?;
    let xs: Vec<usize> = (0..=w - patch).step_by(stride).collect();
    Ok((0..=h - patch).step_by(stride).flat_map(|y| xs.iter().map(move |&x| (x, y))).collect())
}

/// One cropped training patch; all views and masks share the window.
#[derive(Debug, Clone)]
pub struct Patch {
    pub x: usize,
    pub y: usize,
    pub occluded: DPFrame,
    pub clean: DPFrame,
    pub soft_mask: MaskImage,
    pub mask: MaskImage,
}

pub fn extract_patches(sample: &SynthSample, clean: &DPFrame, cfg: PatchConfig) -> Result<Vec<Patch>> {
    let (w, h) = (clean.width(), clean.height());
    patch_windows(w, h, cfg.size, cfg.stride)?
        .into_iter()
        .map(|(x, y)| {
            let s = cfg.size;
            Ok(Patch {
                x,
                y,
                occluded: sample.occluded.crop(x, y, s, s)?,
                clean: clean.crop(x, y, s, s)?,
                soft_mask: sample.soft_mask.crop(x, y, s, s)?,
                mask: sample.mask.crop(x, y, s, s)?,
            })
        })
        .collect()
}

/// `(n_train, n_test)` for `n` samples, keeping the 804/100 proportion.
pub fn split_counts(n: usize) -> (usize, usize) {
    let n_test = (2 * n * 100 + 904) / (2 * 904);
    (n - n_test, n_test)
}

/// A clean capture: an identifier, the frame and its stored orientation.
#[derive(Debug, Clone)]
pub struct CleanFrame {
    pub id: String,
    pub frame: DPFrame,
    pub axis: DisparityAxis,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_>>()?;
    v.sort();
    Ok(v)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads clean frames from `dir`: every subdirectory is a frame directory
/// (`left`/`right`/`combined`), every `.png`/`.pfm` file an in-focus RGB
/// capture.
pub fn load_clean_frames(dir: &Path) -> Result<Vec<CleanFrame>> {
    let mut out = Vec::new();
    for p in sorted_entries(dir)? {
        if p.is_dir() {
            let (frame, axis) = DPFrame::load_dir(&p)?;
            out.push(CleanFrame { id: stem(&p), frame, axis });
        } else if matches!(p.extension().and_then(|e| e.to_str()), Some("png" | "pfm")) {
            let frame = DPFrame::in_focus(load_any(&p)?)?;
            out.push(CleanFrame { id: stem(&p), frame, axis: DisparityAxis::Horizontal });
        }
    }
    Ok(out)
}

/// Loads fence assets: each subdirectory holds `texture.{pfm,png}` and
/// `mask.{png,pfm}` (binarized at 0.5).
pub fn load_assets(dir: &Path) -> Result<Vec<FenceAsset>> {
    let mut out = Vec::new();
    for p in sorted_entries(dir)? {
        if !p.is_dir() {
            continue;
        }
        let find = |name: &str, exts: &[&str]| {
            exts.iter().map(|e| p.join(format!("{name}.{e}"))).find(|q| q.exists()).ok_or_else(|| Error::Io {
                path: p.join(name),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing asset file"),
            })
        };
        let texture = load_any(&find("texture", &["pfm", "png"])?)?;
        let mask_path = find("mask", &["png", "pfm"])?;
        let mask = if mask_path.extension().is_some_and(|e| e == "pfm") {
            MaskImage::from_image(&load_pfm(&mask_path)?)?
        } else {
            load_mask_png(&mask_path)?
        };
        out.push(FenceAsset::new(stem(&p), texture, mask.threshold(0.5))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub occluded: String,
    pub clean: String,
    pub soft_mask: String,
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub split: String,
    pub clean_id: String,
    pub width: usize,
    pub height: usize,
    pub disparity_axis: DisparityAxis,
    #[serde(flatten)]
    pub provenance: SampleProvenance,
    pub files: SampleFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub sample_id: String,
    pub index: usize,
    pub x: usize,
    pub y: usize,
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchManifest {
    pub size: usize,
    pub stride: usize,
    pub count: usize,
    pub records: Vec<PatchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub generator: String,
    pub config: SynthConfig,
    pub config_sha256: String,
    pub n_samples: usize,
    pub split_rule: String,
    pub splits: Splits,
    pub records: Vec<SampleRecord>,
    pub patches: Option<PatchManifest>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn mask_oriented(m: &MaskImage, axis: DisparityAxis) -> MaskImage {
    match axis {
        DisparityAxis::Horizontal => m.clone(),
        DisparityAxis::Vertical => m.transpose(),
    }
}

fn write_masks(dir: &Path, soft: &MaskImage, mask: &MaskImage) -> Result<()> {
    save_pfm(&soft.to_image(), &dir.join("mask_soft.pfm"))?;
    save_mask_png(mask, &dir.join("mask.png"))
}

fn rel(p: &Path, root: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

/// Writes a patch set for one sample in stored orientation.
fn write_patches(
    id: &str,
    sample: &SynthSample,
    clean: &CleanFrame,
    cfg: PatchConfig,
    root: &Path,
) -> Result<Vec<PatchRecord>> {
    // patches are cut in the orientation the frames are stored in
    let (stored, stored_clean) = match clean.axis {
        DisparityAxis::Horizontal => (sample.clone(), clean.frame.clone()),
        DisparityAxis::Vertical => (
            SynthSample {
                occluded: sample.occluded.transpose(),
                soft_mask: sample.soft_mask.transpose(),
                mask: sample.mask.transpose(),
                provenance: sample.provenance.clone(),
            },
            clean.frame.transpose(),
        ),
    };
    let mut records = Vec::new();
    for (k, p) in extract_patches(&stored, &stored_clean, cfg)?.into_iter().enumerate() {
        let dir = root.join("patches").join(format!("{id}_{k:03}"));
        // stored orientation is already applied; write as-is
        p.occluded.save_dir(&dir.join("occluded"), DisparityAxis::Horizontal)?;
        p.clean.save_dir(&dir.join("clean"), DisparityAxis::Horizontal)?;
        write_masks(&dir, &p.soft_mask, &p.mask)?;
        records.push(PatchRecord { sample_id: id.to_string(), index: k, x: p.x, y: p.y, dir: rel(&dir, root) });
    }
    Ok(records)
}

/// Generates `n` samples into `out` and writes `manifest.json`.
///
/// Sample `i` uses clean frame `i mod len(clean)` and an asset drawn from
/// its own seed, so the result is independent of the thread count.
pub fn generate_dataset(
    clean: &[CleanFrame],
    assets: &[FenceAsset],
    synth: &Synthesizer,
    n: usize,
    out: &Path,
) -> Result<DatasetManifest> {
    if clean.is_empty() || assets.is_empty() {
        return Err(Error::InvalidArgument("need at least one clean frame and one fence asset".into()));
    }
    let config = synth.config();
    let (n_train, _) = split_counts(n);
    std::fs::create_dir_all(out).map_err(io_err(out))?;

    let results: Vec<(SampleRecord, Vec<PatchRecord>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let id = format!("{i:06}");
            let cf = &clean[i % clean.len()];
            let seed = super::sample_seed(config, i as u64);
            let asset = &assets[super::rng_index(seed, "asset", assets.len())];
            let sample = synth.synthesize_sample(&cf.frame, asset, i as u64)?;
            let dir = out.join("samples").join(&id);
            sample.occluded.save_dir(&dir.join("occluded"), cf.axis)?;
            cf.frame.save_dir(&dir.join("clean"), cf.axis)?;
            write_masks(&dir, &mask_oriented(&sample.soft_mask, cf.axis), &mask_oriented(&sample.mask, cf.axis))?;
            let split = if i < n_train { "train" } else { "test" };
            let patches = match (&config.patches, split) {
                (Some(p), "train") => write_patches(&id, &sample, cf, *p, out)?,
                _ => Vec::new(),
            };
            let record = SampleRecord {
                id: id.clone(),
                split: split.to_string(),
                clean_id: cf.id.clone(),
                width: cf.frame.width(),
                height: cf.frame.height(),
                disparity_axis: cf.axis,
                provenance: sample.provenance,
                files: SampleFiles {
                    occluded: rel(&dir.join("occluded"), out),
                    clean: rel(&dir.join("clean"), out),
                    soft_mask: rel(&dir.join("mask_soft.pfm"), out),
                    mask: rel(&dir.join("mask.png"), out),
                },
            };
            Ok((record, patches))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(n);
    let mut patch_records = Vec::new();
    for (r, p) in results {
        records.push(r);
        patch_records.extend(p);
    }
    let splits = Splits {
        train: records.iter().filter(|r| r.split == "train").map(|r| r.id.clone()).collect(),
        test: records.iter().filter(|r| r.split == "test").map(|r| r.id.clone()).collect(),
    };
    let patches = config.patches.map(|p| PatchManifest {
        size: p.size,
        stride: p.stride,
        count: patch_records.len(),
        records: patch_records,
    });
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        generator: concat!("dpfence ", env!("CARGO_PKG_VERSION")).to_string(),
        config: config.clone(),
        config_sha256: sha256_hex(&serde_json::to_vec(config)?),
        n_samples: n,
        split_rule: SPLIT_RULE.to_string(),
        splits,
        records,
        patches,
    };
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}
