use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Raster};
use crate::ops::{box_mean, pool2};

/// Side of the local windows used by the filter bank and normalization.
pub const FEATURE_WINDOW: usize = 9;
const EPS: f64 = 1e-6;

/// Planar multi-channel float map (features at half resolution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * width * height {
            return Err(Error::Dimensions(format!(
                "{channels}x{width}x{height} feature map needs {} values, got {}",
                channels * width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("feature values must be finite".into()));
        }
        Ok(Self { channels, width, height, data })
    }

    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Self { channels, width, height, data: vec![0.0; channels * width * height] }
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, o: &FeatureMap) -> bool {
        (self.channels, self.width, self.height) == (o.channels, o.width, o.height)
    }

    pub fn to_raster(&self) -> Raster {
        Raster { width: self.width, height: self.height, channels: self.channels, data: self.data.clone() }
    }
}

/// Zero-mean, unit-variance per local window: `(v - m) / max(sigma, eps)`.
/// A floor rather than an additive `eps` keeps the result exactly
/// scale-invariant wherever the window has resolvable texture.
fn normalize_local(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let m = box_mean(v, w, h, FEATURE_WINDOW);
    let centered: Vec<f64> = v.iter().zip(&m).map(|(a, b)| a - b).collect();
    let sq: Vec<f64> = centered.iter().map(|c| c * c).collect();
    let var = box_mean(&sq, w, h, FEATURE_WINDOW);
    centered.iter().zip(var).map(|(c, s)| c / s.max(0.0).sqrt().max(EPS)).collect()
}

/// Fixed four-channel filter bank at half resolution.
///
/// Channels: locally mean-removed intensity, x- and y-gradients (central
/// differences), local contrast. Each channel is normalized per 9x9 window,
/// then feature vectors longer than one are scaled to unit length. Short
/// vectors (nearly featureless pixels) keep their length, so their
/// ill-conditioned direction carries little weight.
pub fn extract_features(gray: &Image) -> Result<FeatureMap> {
    if gray.channels() != 1 {
        return Err(Error::Channels("feature extraction expects a 1-channel image".into()));
    }
    let (w, h) = (gray.width(), gray.height());
    if w < 2 || h < 2 || w % 2 != 0 || h % 2 != 0 {
        return Err(Error::Dimensions(format!("features need even dims >= 2, got {w}x{h}")));
    }
    // Work relative to one pixel's value: a constant image is then exactly
    // zero everywhere and stays zero through every filter.
    let origin = gray.data()[0] as f64;
    let full: Vec<f64> = gray.data().iter().map(|&v| v as f64 - origin).collect();
    let (g, hw, hh) = pool2(&full, w, h);

    let mean = box_mean(&g, hw, hh, FEATURE_WINDOW);
    let detail: Vec<f64> = g.iter().zip(&mean).map(|(a, b)| a - b).collect();
    let at = |x: i64, y: i64| {
        let x = crate::dpform::reflect(x, hw);
        let y = crate::dpform::reflect(y, hh);
        g[y * hw + x]
    };
    let mut gx = Vec::with_capacity(hw * hh);
    let mut gy = Vec::with_capacity(hw * hh);
    for y in 0..hh as i64 {
        for x in 0..hw as i64 {
            gx.push(0.5 * (at(x + 1, y) - at(x - 1, y)));
            gy.push(0.5 * (at(x, y + 1) - at(x, y - 1)));
        }
    }
    let sq: Vec<f64> = detail.iter().map(|d| d * d).collect();
    let contrast: Vec<f64> = box_mean(&sq, hw, hh, FEATURE_WINDOW).into_iter().map(|v| v.max(0.0).sqrt()).collect();

    let chans: Vec<Vec<f64>> = [detail, gx, gy, contrast].iter().map(|c| normalize_local(c, hw, hh)).collect();
    let n = hw * hh;
    let mut data = vec![0.0f32; 4 * n];
    for i in 0..n {
        let norm = chans.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt();
        let scale = 1.0 / norm.max(1.0);
        for (k, c) in chans.iter().enumerate() {
            data[k * n + i] = (c[i] * scale) as f32;
        }
    }
    FeatureMap::new(4, hw, hh, data)
}
