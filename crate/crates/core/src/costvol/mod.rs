//! The geometric cue: half-resolution features, a phase-shift correlation
//! cost volume over non-negative disparities, box aggregation and a
//! sub-pixel disparity/confidence readout.
//!
//! Dual-pixel disparity is unidirectional: with the left view's PSF
//! centroid left of the right view's, scene content in the right view sits
//! at larger x, so only `d >= 0` is searched.

mod features;
mod volume;

pub use features::{extract_features, FeatureMap, FEATURE_WINDOW};
pub use volume::{
    aggregate_cost, build_cost_volume, disp_pyramid, disparity_argmax, disparity_grid, phase_shift, refine_peak,
    ConfidenceMap, CostVolume, DisparityMap, PyramidLevel, ScalarMap,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::DPFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Largest disparity searched, in half-resolution pixels.
    pub dmax: f64,
    pub step: f64,
    /// Odd box size of the (x, y, d) aggregation; 1 disables it.
    pub window: usize,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { dmax: 8.0, step: 0.25, window: 5 }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        disparity_grid(self.dmax, self.step)?;
        if self.window % 2 == 0 {
            return Err(Error::InvalidArgument("aggregation window must be odd".into()));
        }
        Ok(())
    }
}

/// Everything the disparity stage produces for one frame.
#[derive(Debug, Clone)]
pub struct DisparityResult {
    pub volume: CostVolume,
    pub disparity: DisparityMap,
    pub confidence: ConfidenceMap,
    pub pyramid: Vec<PyramidLevel>,
}

/// Features of both views, cost volume, aggregation and readout.
pub fn estimate_disparity(frame: &DPFrame, params: &CostParams) -> Result<DisparityResult> {
    params.validate()?;
    let fl = extract_features(&frame.left)?;
    let fr = extract_features(&frame.right)?;
    let raw = build_cost_volume(&fl, &fr, params.dmax, params.step)?;
    let volume = aggregate_cost(&raw, params.window)?;
    let pyramid = disp_pyramid(&volume);
    let disparity = pyramid[0].disparity.clone();
    let confidence = pyramid[0].confidence.clone();
    Ok(DisparityResult { volume, disparity, confidence, pyramid })
}

#[cfg(test)]
mod tests;
