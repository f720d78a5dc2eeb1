use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use dpfence::costvol::{estimate_disparity, CostParams, ScalarMap};
use dpfence::defence::{remove_fence_detailed, segment_fence_detailed, segment_fence_learned, SegmentConfig};
use dpfence::dpform::{make_dp_psf_pair, PsfKernel};
use dpfence::eval::evaluate_dataset;
use dpfence::hashing::substream;
use dpfence::image::pfm::{save_pfm, write_pfm};
use dpfence::image::png_io::{save_mask_png, save_png8};
use dpfence::structfreq::FreqDpWeights;
use dpfence::synth::{
    generate_dataset, load_assets, load_clean_frames, procedural, CleanFrame, DatasetManifest, PatchConfig,
    SynthConfig, Synthesizer,
};
use dpfence::{DPFrame, DisparityAxis, Image, MaskImage, Raster};

use crate::report::{walk_files, Recorder};
use crate::{DisparityArgs, EvalArgs, PsfPreviewArgs, RemoveArgs, SegmentArgs, SegmentMode, SynthArgs, UsageError};

pub const RUN_REPORT: &str = "run_report.json";

/// Reads a JSON config (unknown keys rejected, missing keys defaulted), or
/// the defaults when no file is given. Problems are usage errors.
fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
}

fn usage<T>(r: dpfence::Result<T>) -> Result<T> {
    r.map_err(|e| UsageError(e.to_string()).into())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_frame(dir: &Path) -> Result<(DPFrame, DisparityAxis)> {
    DPFrame::load_dir(dir).with_context(|| format!("loading frame from {}", dir.display()))
}

fn stored_image(img: Image, axis: DisparityAxis) -> Image {
    match axis {
        DisparityAxis::Horizontal => img,
        DisparityAxis::Vertical => img.transpose(),
    }
}

fn stored_mask(m: MaskImage, axis: DisparityAxis) -> MaskImage {
    match axis {
        DisparityAxis::Horizontal => m,
        DisparityAxis::Vertical => m.transpose(),
    }
}

/// A map scaled into `[0, 1]` (clamped) for display or mask-like storage.
fn map_image(m: &ScalarMap, scale: f32) -> Result<Image> {
    Ok(Image::from_clamped(m.width, m.height, 1, m.data.iter().map(|&v| v * scale).collect())?)
}

fn echo<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.base_seed = seed;
    }
    if a.patches || a.patch.is_some() || a.stride.is_some() {
        let base = cfg.patches.unwrap_or_default();
        cfg.patches = Some(PatchConfig { size: a.patch.unwrap_or(base.size), stride: a.stride.unwrap_or(base.stride) });
    }
    usage(cfg.validate())?;
    if a.width % 2 != 0 || a.height % 2 != 0 || a.width < 64 || a.height < 64 {
        return Err(UsageError("procedural frames need even dims of at least 64".into()).into());
    }
    let synthesizer = usage(Synthesizer::new(cfg.clone()))?;
    create_dir(&a.out)?;
    let mut rec = Recorder::new("synth", &a.out, &cfg)?;
    rec.seed(cfg.base_seed);
    let seed = cfg.base_seed;
    let clean: Vec<CleanFrame> = match &a.clean {
        Some(dir) => {
            rec.input("clean", dir);
            rec.time("load_clean", || load_clean_frames(dir)).with_context(|| format!("loading {}", dir.display()))?
        }
        None => (0..a.procedural_count as u64)
            .map(|i| {
                let frame = procedural::clean_frame(a.width, a.height, substream(seed, "cli-clean").wrapping_add(i))?;
                Ok(CleanFrame { id: format!("procedural_{i:03}"), frame, axis: DisparityAxis::Horizontal })
            })
            .collect::<dpfence::Result<_>>()?,
    };
    let assets = match &a.assets {
        Some(dir) => {
            rec.input("assets", dir);
            rec.time("load_assets", || load_assets(dir)).with_context(|| format!("loading {}", dir.display()))?
        }
        None => (0..a.procedural_count as u64)
            .map(|i| procedural::fence(a.width, a.height, substream(seed, "cli-fence").wrapping_add(i)))
            .collect::<dpfence::Result<_>>()?,
    };
    if clean.is_empty() || assets.is_empty() {
        bail!("no clean frames or fence assets found");
    }
    let manifest = rec.time("generate", || generate_dataset(&clean, &assets, &synthesizer, a.n, &a.out))?;
    let files: Vec<PathBuf> = walk_files(&a.out)?.into_iter().filter(|p| !p.ends_with(RUN_REPORT)).collect();
    rec.outputs(files);
    rec.summary(json!({
        "samples": manifest.n_samples,
        "train": manifest.splits.train.len(),
        "test": manifest.splits.test.len(),
        "patches": manifest.patches.as_ref().map(|p| p.count),
        "procedural_sources": a.clean.is_none() || a.assets.is_none(),
    }));
    rec.finish(&a.out.join(RUN_REPORT))?;
    eprintln!("wrote {} samples to {}", manifest.n_samples, a.out.display());
    Ok(())
}

pub fn disparity(a: &DisparityArgs) -> Result<()> {
    let mut cost: CostParams = load_config(a.config.as_deref())?;
    if let Some(v) = a.dmax {
        cost.dmax = v;
    }
    if let Some(v) = a.step {
        cost.step = v;
    }
    if let Some(v) = a.window {
        cost.window = v;
    }
    usage(cost.validate())?;
    let (frame, axis) = load_frame(&a.frame)?;
    create_dir(&a.out)?;
    let mut rec = Recorder::new("disparity", &a.out, cost)?;
    rec.input("frame", &a.frame);
    let r = rec.time("cost_volume", || estimate_disparity(&frame, &cost))?;
    let to_stored = |m: &ScalarMap, scale: f32| -> Result<Image> { Ok(stored_image(map_image(m, scale)?, axis)) };
    let raw = |m: &ScalarMap| -> Result<Raster> {
        let (w, h) = if axis == DisparityAxis::Vertical { (m.height, m.width) } else { (m.width, m.height) };
        Ok(Raster::new(w, h, 1, stored_raw(m, axis))?)
    };
    let paths = [a.out.join("disparity.pfm"), a.out.join("confidence.pfm"), a.out.join("disparity.png"), a.out.join("confidence.png")];
    write_pfm(&raw(&r.disparity)?, &paths[0])?;
    write_pfm(&raw(&r.confidence)?, &paths[1])?;
    save_png8(&to_stored(&r.disparity, 1.0 / cost.dmax as f32)?, &paths[2])?;
    save_png8(&to_stored(&r.confidence, 1.0)?, &paths[3])?;
    rec.outputs(paths);
    if a.dump_volume {
        let dir = a.out.join("volume");
        create_dir(&dir)?;
        let v = &r.volume;
        for i in 0..v.depth() {
            let plane = ScalarMap { width: v.width(), height: v.height(), data: v.plane(i).to_vec() };
            let p = dir.join(format!("plane_{i:03}.pfm"));
            write_pfm(&raw(&plane)?, &p)?;
            rec.output(p);
        }
        let p = dir.join("volume.json");
        let sidecar = json!({ "disparities": v.disparities(), "width": v.width(), "height": v.height(), "axis": axis });
        std::fs::write(&p, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        rec.output(p);
    }
    let mean_conf = r.confidence.data.iter().map(|&c| c as f64).sum::<f64>() / r.confidence.data.len() as f64;
    rec.summary(json!({ "half_resolution": [r.disparity.width, r.disparity.height], "mean_confidence": mean_conf }));
    rec.finish(&a.out.join(RUN_REPORT))?;
    Ok(())
}

/// Raw map values in stored orientation.
fn stored_raw(m: &ScalarMap, axis: DisparityAxis) -> Vec<f32> {
    match axis {
        DisparityAxis::Horizontal => m.data.clone(),
        DisparityAxis::Vertical => {
            let (w, h) = (m.width, m.height);
            let mut out = vec![0.0; w * h];
            for y in 0..h {
                for x in 0..w {
                    out[x * h + y] = m.data[y * w + x];
                }
            }
            out
        }
    }
}

fn segment_config(config: Option<&Path>, tau_m: Option<f64>, radius: Option<usize>, dmax: Option<f64>) -> Result<SegmentConfig> {
    let mut cfg: SegmentConfig = load_config(config)?;
    if let Some(v) = tau_m {
        cfg.tau_m = v;
    }
    if let Some(v) = radius {
        cfg.radius = v;
    }
    if let Some(v) = dmax {
        cfg.cost.dmax = v;
    }
    usage(cfg.validate())?;
    Ok(cfg)
}

pub fn segment(a: &SegmentArgs) -> Result<()> {
    let cfg = segment_config(a.config.as_deref(), a.tau_m, a.radius, a.dmax)?;
    let weights = match (&a.mode, &a.weights) {
        (SegmentMode::LearnedToy, Some(dir)) => {
            Some(FreqDpWeights::load(dir).with_context(|| format!("loading weights from {}", dir.display()))?)
        }
        (SegmentMode::LearnedToy, None) => Some(FreqDpWeights::seeded(a.seed)),
        (SegmentMode::Classical, _) => None,
    };
    let (frame, axis) = load_frame(&a.frame)?;
    create_dir(&a.out)?;
    let mut rec = Recorder::new("segment", &a.out, json!({ "mode": a.mode, "segment": echo(&cfg)? }))?;
    rec.input("frame", &a.frame);
    let mask_path = a.out.join("mask.png");
    let mask = match weights {
        None => {
            let seg = rec.time("segment", || segment_fence_detailed(&frame, &cfg))?;
            let score = stored_image(map_image(&seg.score, 1.0)?, axis);
            let p = a.out.join("score.pfm");
            save_pfm(&score, &p)?;
            rec.output(p);
            seg.mask
        }
        Some(w) => {
            rec.seed(w.seed);
            if let Some(dir) = &a.weights {
                rec.input("weights", dir);
            }
            let (soft, binary) = rec.time("forward", || segment_fence_learned(&frame, &cfg, &w))?;
            let p = a.out.join("mask_soft.pfm");
            save_pfm(&stored_mask(soft, axis).to_image(), &p)?;
            rec.output(p);
            binary
        }
    };
    let coverage = mask.coverage();
    save_mask_png(&stored_mask(mask, axis), &mask_path)?;
    rec.output(mask_path);
    rec.summary(json!({ "mask_coverage": coverage }));
    rec.finish(&a.out.join(RUN_REPORT))?;
    Ok(())
}

pub fn remove(a: &RemoveArgs) -> Result<()> {
    let cfg = segment_config(a.config.as_deref(), a.tau_m, a.radius, a.dmax)?;
    let (frame, axis) = load_frame(&a.frame)?;
    create_dir(&a.out)?;
    let mut rec = Recorder::new("remove", &a.out, cfg)?;
    rec.input("frame", &a.frame);
    let r = rec.time("segment_and_inpaint", || remove_fence_detailed(&frame, &cfg))?;
    let summary = json!({
        "mask_coverage": r.segmentation.mask.coverage(),
        "inpainted_coverage": r.mask.coverage(),
    });
    let paths = [a.out.join("mask.png"), a.out.join("fill_mask.png"), a.out.join("restored.png")];
    rec.time("write", || -> Result<()> {
        save_mask_png(&stored_mask(r.segmentation.mask, axis), &paths[0])?;
        save_mask_png(&stored_mask(r.mask, axis), &paths[1])?;
        save_png8(&stored_image(r.restored, axis), &paths[2])?;
        Ok(())
    })?;
    rec.outputs(paths);
    rec.summary(summary);
    rec.finish(&a.out.join(RUN_REPORT))?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&a.manifest).with_context(|| format!("loading {}", a.manifest.display()))?;
    let root = a.manifest.parent().unwrap_or(Path::new("."));
    let report_dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut rec = Recorder::new("eval", report_dir, json!({}))?;
    rec.input("manifest", &a.manifest);
    rec.input("pred", &a.pred);
    let report = rec.time("evaluate", || evaluate_dataset(&manifest, root, &a.pred))?;
    create_dir(report_dir)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    rec.output(a.out.clone());
    rec.summary(json!({ "samples": report.mean.samples, "f1": report.mean.f1, "psnr": report.mean.psnr }));
    print!("{}", report.to_table());
    let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    rec.finish(&report_dir.join(format!("{stem}.run_report.json")))?;
    Ok(())
}

/// Nearest-neighbour enlarged heatmap of a kernel, normalized by `peak`.
fn heatmap(k: &PsfKernel, peak: f32, scale: usize) -> Result<Image> {
    let side = k.side();
    let r = k.radius() as i64;
    let n = side * scale;
    Ok(Image::from_fn(n, n, 1, |_, x, y| {
        let (kx, ky) = ((x / scale) as i64 - r, (y / scale) as i64 - r);
        (k.at(kx, ky) / peak).clamp(0.0, 1.0)
    })?)
}

pub fn psf_preview(a: &PsfPreviewArgs) -> Result<()> {
    if !(a.alpha >= 0.0 && a.alpha.is_finite()) || a.scale == 0 {
        return Err(UsageError("--alpha must be >= 0 and --scale > 0".into()).into());
    }
    let pair = make_dp_psf_pair(a.alpha)?;
    create_dir(&a.out)?;
    let mut rec = Recorder::new("psf-preview", &a.out, json!({ "alpha": a.alpha, "scale": a.scale }))?;
    let peak = [&pair.left, &pair.right, &pair.combined]
        .iter()
        .flat_map(|k| k.taps().iter().copied())
        .fold(f32::MIN_POSITIVE, f32::max);
    for (name, k) in [("k_L", &pair.left), ("k_R", &pair.right), ("k_C", &pair.combined)] {
        let p = a.out.join(format!("{name}.png"));
        save_png8(&heatmap(k, peak, a.scale)?, &p)?;
        rec.output(p);
    }
    let centroid = |k: &PsfKernel| k.centroid().0;
    rec.summary(json!({
        "radius": pair.combined.radius(),
        "centroid_x": { "left": centroid(&pair.left), "right": centroid(&pair.right), "combined": centroid(&pair.combined) },
        "disparity": centroid(&pair.right) - centroid(&pair.left),
    }));
    rec.finish(&a.out.join(RUN_REPORT))?;
    Ok(())
}
