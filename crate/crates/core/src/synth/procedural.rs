//! Procedural stand-ins for captured backgrounds and fence photographs.
//!
//! Used by tests, the demo workflow and `synth` runs without input
//! directories. Backgrounds are multi-octave value noise (textured but not
//! periodic); fences are lattices of thick bars with a shaded, lightly
//! textured surface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FenceAsset;
use crate::error::Result;
use crate::image::{DPFrame, Image, MaskImage};

/// Bilinear value noise with lattice spacing `cell`.
fn value_noise(w: usize, h: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen::<f64>() - 0.5).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let gy = y / cell;
        let fy = smooth((y % cell) as f64 / cell as f64);
        for x in 0..w {
            let gx = x / cell;
            let fx = smooth((x % cell) as f64 / cell as f64);
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(gx, gy) * (1.0 - fx) + at(gx + 1, gy) * fx;
            let bot = at(gx, gy + 1) * (1.0 - fx) + at(gx + 1, gy + 1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// Textured, in-focus RGB background with values roughly in `[0.2, 0.8]`.
pub fn background(w: usize, h: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lum = vec![0.0f64; w * h];
    for (cell, amp) in [(96, 0.30), (48, 0.22), (24, 0.16), (12, 0.12), (6, 0.08), (3, 0.05)] {
        for (l, n) in lum.iter_mut().zip(value_noise(w, h, cell, &mut rng)) {
            *l += amp * n;
        }
    }
    let tint: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.08..0.08));
    let chroma: Vec<Vec<f64>> = (0..3).map(|_| value_noise(w, h, 64, &mut rng)).collect();
    let mut data = Vec::with_capacity(3 * w * h);
    for c in 0..3 {
        data.extend(lum.iter().zip(&chroma[c]).map(|(&l, &ch)| (0.5 + l + tint[c] + 0.1 * ch) as f32));
    }
    Image::from_clamped(w, h, 3, data)
}

/// An in-focus clean frame: both DP views equal the green channel.
pub fn clean_frame(w: usize, h: usize, seed: u64) -> Result<DPFrame> {
    DPFrame::in_focus(background(w, h, seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FenceStyle {
    /// Horizontal and vertical bars.
    Grid,
    /// Two diagonal bar families (chain-link look).
    Diamond,
    /// Vertical bars only.
    Pickets,
}

/// Parameters of one procedural fence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FenceSpec {
    pub style: FenceStyle,
    /// Bar spacing in pixels.
    pub period: f64,
    /// Bar thickness in pixels.
    pub thickness: f64,
    /// Lattice angle for diamonds, in degrees from the vertical.
    pub angle_deg: f64,
    pub color: [f32; 3],
    /// Amplitude of surface shading and grain; 0 gives a flat fence.
    pub texture: f32,
    pub seed: u64,
}

impl FenceSpec {
    /// A random fence whose color is far from mid-gray (dark or bright), so
    /// it contrasts with typical backgrounds.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let style = [FenceStyle::Grid, FenceStyle::Diamond, FenceStyle::Pickets][rng.gen_range(0..3)];
        let thickness = rng.gen_range(16.0..28.0);
        let period = thickness + rng.gen_range(40.0..80.0);
        let dark = rng.gen_bool(0.5);
        let base: f32 = if dark { rng.gen_range(0.02..0.10) } else { rng.gen_range(0.86..0.96) };
        let color = std::array::from_fn(|_| (base + rng.gen_range(-0.04..0.04f32)).clamp(0.0, 1.0));
        Self {
            style,
            period,
            thickness,
            angle_deg: rng.gen_range(30.0..60.0),
            color,
            texture: 0.06,
            seed: rng.gen(),
        }
    }

    /// Signed distance-like coordinate across the nearest bar, in `[0, 1]`
    /// (0 at the bar axis), or `None` between bars.
    fn bar_profile(&self, x: f64, y: f64) -> Option<f64> {
        let half = self.thickness / 2.0;
        let across = |t: f64| {
            let m = t.rem_euclid(self.period);
            let d = m.min(self.period - m);
            (d < half).then(|| d / half)
        };
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let families: Vec<Option<f64>> = match self.style {
            FenceStyle::Grid => vec![across(x), across(y)],
            FenceStyle::Pickets => vec![across(x)],
            FenceStyle::Diamond => vec![across(c * x + s * y), across(c * x - s * y)],
        };
        families.into_iter().flatten().reduce(f64::min)
    }

    pub fn render(&self, w: usize, h: usize) -> Result<FenceAsset> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let offset = (rng.gen_range(0.0..self.period), rng.gen_range(0.0..self.period));
        let grain = value_noise(w, h, 2, &mut rng);
        let mut bits = vec![false; w * h];
        let mut shade = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                if let Some(t) = self.bar_profile(x as f64 + offset.0, y as f64 + offset.1) {
                    let i = y * w + x;
                    bits[i] = true;
                    // cylindrical highlight along the bar axis plus grain
                    shade[i] = self.texture * (1.0 - 2.0 * (t * t) as f32) + self.texture * grain[i] as f32;
                }
            }
        }
        let mut data = Vec::with_capacity(3 * w * h);
        for c in 0..3 {
            data.extend((0..w * h).map(|i| if bits[i] { self.color[c] + shade[i] } else { 0.5 }));
        }
        let id = format!("procedural-{:016x}", self.seed);
        FenceAsset::new(id, Image::from_clamped(w, h, 3, data)?, MaskImage::from_bools(w, h, &bits)?)
    }
}

/// A random procedural fence asset of size `w x h`.
pub fn fence(w: usize, h: usize, seed: u64) -> Result<FenceAsset> {
    FenceSpec::random(seed).render(w, h)
}
