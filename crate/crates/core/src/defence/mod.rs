//! The end-user pipeline: a classical dual-cue fence segmentation (defocus
//! disparity from the cost volume, local periodicity of the colour image),
//! mask post-processing, and removal by harmonic inpainting.
//!
//! Segmentation works at the cost-volume resolution (half the frame) and is
//! upsampled by nearest neighbour at the end.

mod inpaint;
mod morph;
mod refine;

pub use inpaint::{inpaint, INPAINT_MAX_ITERATIONS, INPAINT_TOLERANCE};
pub use morph::dilate_mask;

use serde::{Deserialize, Serialize};

use crate::costvol::{estimate_disparity, CostParams, DisparityResult, ScalarMap};
use crate::error::{Error, Result};
use crate::image::{green_channel, DPFrame, Image, MaskImage};
use crate::ops::{pool2, upsample_nearest};
use crate::structfreq::{freqdp_forward, periodicity_score, FreqDpWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentConfig {
    /// Disparity (half-resolution pixels) at which the geometric cue is 0.5.
    pub tau_d: f64,
    /// Confidence at which the geometric cue stops being attenuated.
    pub tau_c: f64,
    pub w_geo: f64,
    pub w_struct: f64,
    /// Disc radius of the closing/opening at half resolution, and of the
    /// safety dilation before inpainting at full resolution.
    pub radius: usize,
    /// Threshold on the fused score; pixels strictly above it are fence.
    pub tau_m: f64,
    /// Periodicity window at half resolution (power of two).
    pub periodicity_window: usize,
    /// Radius (full-resolution pixels) of the windows in which local fence
    /// and background colour models are fitted to snap the coarse mask to
    /// image edges; 0 disables the snapping.
    pub refine_radius: usize,
    /// Fraction of the way from the local background colour to the local
    /// fence colour beyond which a pixel is fence.
    pub refine_level: f64,
    pub cost: CostParams,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            tau_d: 1.0,
            tau_c: 0.2,
            w_geo: 0.7,
            w_struct: 0.3,
            radius: 2,
            tau_m: 0.5,
            periodicity_window: 64,
            refine_radius: 32,
            refine_level: 0.25,
            cost: CostParams::default(),
        }
    }
}

impl SegmentConfig {
    /// Geometry only: the periodicity cue is switched off.
    pub fn geometry_only(self) -> Self {
        Self { w_geo: 1.0, w_struct: 0.0, ..self }
    }

    /// Structure only: the disparity cue is switched off.
    pub fn structure_only(self) -> Self {
        Self { w_geo: 0.0, w_struct: 1.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.tau_d.is_finite() && self.tau_d > 0.0) {
            return bad("tau_d must be positive");
        }
        if !(self.tau_c > 0.0 && self.tau_c <= 1.0) {
            return bad("tau_c must lie in (0, 1]");
        }
        if !(self.w_geo >= 0.0 && self.w_struct >= 0.0) || (self.w_geo + self.w_struct - 1.0).abs() > 1e-9 {
            return bad("cue weights must be non-negative and sum to 1");
        }
        if !(self.tau_m > 0.0 && self.tau_m < 1.0) {
            return bad("tau_m must lie in (0, 1)");
        }
        if !(self.refine_level > 0.0 && self.refine_level < 1.0) {
            return bad("refine_level must lie in (0, 1)");
        }
        if !self.periodicity_window.is_power_of_two() || self.periodicity_window < 4 {
            return bad("periodicity window must be a power of two >= 4");
        }
        self.cost.validate()
    }
}

/// Geometric cue in `[0, 1]`: the disparity ramp `0.5 + (d - tau_d) / tau_d`
/// clamped to `[0, 1]`, pulled towards the undecided value 0.5 where the
/// match confidence is below `tau_c`.
///
/// Low confidence means the views carry no disparity information there
/// (flat regions, edges parallel to the disparity axis); the cue then
/// abstains instead of voting "background", leaving the decision to the
/// structural cue.
pub fn geometric_cue(disparity: &ScalarMap, confidence: &ScalarMap, tau_d: f64, tau_c: f64) -> ScalarMap {
    let data = disparity
        .data
        .iter()
        .zip(&confidence.data)
        .map(|(&d, &c)| {
            let ramp = (0.5 + (d as f64 - tau_d) / tau_d).clamp(0.0, 1.0);
            let trust = (c as f64 / tau_c).clamp(0.0, 1.0);
            (0.5 + trust * (ramp - 0.5)) as f32
        })
        .collect();
    ScalarMap { width: disparity.width, height: disparity.height, data }
}

/// Everything the classical segmentation computes, for inspection.
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// Final binary mask at full resolution.
    pub mask: MaskImage,
    /// Half-resolution maps.
    pub geometric: ScalarMap,
    pub structural: ScalarMap,
    pub score: ScalarMap,
    pub disparity: DisparityResult,
}

fn check_frame(frame: &DPFrame) -> Result<()> {
    if frame.width() % 2 != 0 || frame.height() % 2 != 0 {
        return Err(Error::Dimensions(format!(
            "segmentation needs even frame dims, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

/// Green channel of the combined image pooled to half resolution.
fn half_green(frame: &DPFrame) -> Result<Image> {
    let g = green_channel(&frame.combined)?;
    let p: Vec<f64> = g.data().iter().map(|&v| v as f64).collect();
    let (o, w, h) = pool2(&p, g.width(), g.height());
    Image::from_clamped(w, h, 1, o.into_iter().map(|v| v as f32).collect())
}

/// Classical dual-cue segmentation with all intermediate maps.
pub fn segment_fence_detailed(frame: &DPFrame, cfg: &SegmentConfig) -> Result<Segmentation> {
    cfg.validate()?;
    check_frame(frame)?;
    let disparity = estimate_disparity(frame, &cfg.cost)?;
    let geometric = geometric_cue(&disparity.disparity, &disparity.confidence, cfg.tau_d, cfg.tau_c);
    let (hw, hh) = (geometric.width, geometric.height);
    let structural = if cfg.w_struct > 0.0 {
        let green = half_green(frame)?;
        let window = cfg.periodicity_window.min(prev_power_of_two(hw.min(hh)));
        let s = periodicity_score(&green, window)?;
        ScalarMap { width: hw, height: hh, data: s.into_data() }
    } else {
        ScalarMap { width: hw, height: hh, data: vec![0.0; hw * hh] }
    };
    let score = ScalarMap {
        width: hw,
        height: hh,
        data: geometric
            .data
            .iter()
            .zip(&structural.data)
            .map(|(&g, &s)| (cfg.w_geo * g as f64 + cfg.w_struct * s as f64) as f32)
            .collect(),
    };
    // strict, so that a pixel where every cue abstains (0.5) stays background
    let bits: Vec<bool> = score.data.iter().map(|&s| s as f64 > cfg.tau_m).collect();
    let cleaned = morph::close_open(&bits, hw, hh, cfg.radius);
    let full = upsample_nearest(&cleaned, hw, 2, frame.width(), frame.height());
    // cost-volume disparity is in half-resolution pixels
    let half_d: Vec<f64> = disparity.disparity.data.iter().map(|&d| 2.0 * d as f64).collect();
    let full_d = upsample_nearest(&half_d, hw, 2, frame.width(), frame.height());
    let full = refine::snap_to_colour(&full, &frame.combined, cfg.refine_radius, cfg.refine_level, Some(&full_d));
    let mask = MaskImage::from_bools(frame.width(), frame.height(), &full)?;
    Ok(Segmentation { mask, geometric, structural, score, disparity })
}

fn prev_power_of_two(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - n.leading_zeros())
    }
}

/// Binary fence mask of a frame (may be empty).
pub fn segment_fence(frame: &DPFrame, cfg: &SegmentConfig) -> Result<MaskImage> {
    Ok(segment_fence_detailed(frame, cfg)?.mask)
}

/// Segmentation by the (untrained) toy dual-cue network: returns the soft
/// network output and its binarisation at `tau_m`.
pub fn segment_fence_learned(
    frame: &DPFrame,
    cfg: &SegmentConfig,
    weights: &FreqDpWeights,
) -> Result<(MaskImage, MaskImage)> {
    cfg.validate()?;
    let disparity = estimate_disparity(frame, &cfg.cost)?;
    let soft = freqdp_forward(&frame.combined, &disparity.pyramid, weights)?;
    let binary = soft.threshold(cfg.tau_m as f32);
    Ok((soft, binary))
}

/// Result of the full removal pipeline.
#[derive(Debug, Clone)]
pub struct Removal {
    pub restored: Image,
    /// Dilated mask that was inpainted.
    pub mask: MaskImage,
    pub segmentation: Segmentation,
}

/// Segment, dilate by `radius`, and inpaint the combined image.
pub fn remove_fence_detailed(frame: &DPFrame, cfg: &SegmentConfig) -> Result<Removal> {
    let segmentation = segment_fence_detailed(frame, cfg)?;
    let mask = dilate_mask(&segmentation.mask, cfg.radius)?;
    let restored = inpaint(&frame.combined, &mask)?;
    Ok(Removal { restored, mask, segmentation })
}

pub fn remove_fence(frame: &DPFrame, cfg: &SegmentConfig) -> Result<(Image, MaskImage)> {
    let r = remove_fence_detailed(frame, cfg)?;
    Ok((r.restored, r.mask))
}

#[cfg(test)]
mod tests;
