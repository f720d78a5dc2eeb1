//! Dual-pixel image formation.
//!
//! Each half-aperture view is the sharp scene convolved with its own
//! depth-dependent PSF; the full-aperture image uses the mean of the two.
//! Disparity is horizontal throughout this module.

mod conv;
mod grid;
mod psf;

pub use conv::{patchwise_conv, patchwise_conv_mask};
pub(crate) use conv::reflect;
pub use grid::{scale_psf_grid, DpGrids, GridShape, ParametricPsf, PsfGrid, View};
pub use psf::{make_dp_psf_pair, DpPsfPair, PsfKernel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{green_channel, DPFrame, Image};

/// Thin-lens defocus model. The blur scale of a point at depth `d` is
/// `blur_constant * |1/focus - 1/d|`; with the focus at infinity
/// (`focus_distance_m: None`) this is `blur_constant / d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinLens {
    /// Focus distance in meters; `None` means focused at infinity.
    pub focus_distance_m: Option<f64>,
    /// Blur radius in pixels of a point one meter away (pixel * meter).
    pub blur_constant: f64,
}

impl Default for ThinLens {
    fn default() -> Self {
        Self { focus_distance_m: None, blur_constant: 0.8 }
    }
}

impl ThinLens {
    pub fn validate(&self) -> Result<()> {
        if !(self.blur_constant > 0.0 && self.blur_constant.is_finite()) {
            return Err(Error::InvalidArgument("blur_constant must be > 0".into()));
        }
        if let Some(f) = self.focus_distance_m {
            if !(f > 0.0) {
                return Err(Error::InvalidArgument("focus distance must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Blur scale for an object at depth `depth_m` meters.
pub fn blur_scale(lens: &ThinLens, depth_m: f64) -> Result<f64> {
    lens.validate()?;
    if !(depth_m > 0.0) {
        return Err(Error::InvalidArgument(format!("depth must be > 0, got {depth_m}")));
    }
    let inv_focus = lens.focus_distance_m.map_or(0.0, |f| 1.0 / f);
    Ok(lens.blur_constant * (inv_focus - 1.0 / depth_m).abs())
}

/// Expected full-resolution disparity per pixel from the kernels' first
/// moments: the horizontal centroid of the right view's effective kernel
/// minus the left view's. Content at depth blurred by these grids appears
/// this far to the right in the right view.
pub fn moment_disparity(grids: &DpGrids, w: usize, h: usize) -> Result<Vec<f32>> {
    let cx = |g: &PsfGrid| -> Result<Vec<f64>> {
        let shape = g.shape();
        if shape.cols > w || shape.rows > h {
            return Err(Error::Dimensions(format!("{}x{} grid does not fit {w}x{h}", shape.rows, shape.cols)));
        }
        let v: Vec<f64> = g.kernels().iter().map(|k| k.centroid().0).collect();
        Ok(conv::blend_cells(g, w, h, &v))
    };
    let (l, r) = (cx(&grids.left)?, cx(&grids.right)?);
    Ok(r.iter().zip(&l).map(|(r, l)| (r - l) as f32).collect())
}

/// Forms dual-pixel views of an all-in-focus RGB scene at uniform blur
/// scale `alpha`, using the default parametric PSF model.
pub fn form_dp_views(sharp: &Image, alpha: f64, shape: GridShape) -> Result<DPFrame> {
    let grids = ParametricPsf::default().grids(alpha, shape)?;
    form_dp_views_with(sharp, &grids)
}

/// Forms dual-pixel views with explicit per-view grids.
pub fn form_dp_views_with(sharp: &Image, grids: &DpGrids) -> Result<DPFrame> {
    let green = green_channel(sharp)?;
    let left = patchwise_conv(&green, &grids.left)?;
    let right = patchwise_conv(&green, &grids.right)?;
    let combined = patchwise_conv(sharp, &grids.combined)?;
    DPFrame::new(left, right, combined)
}
