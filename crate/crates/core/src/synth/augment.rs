//! Fence asset augmentation: one geometric transform shared by texture and
//! mask, and a color jitter that touches the texture only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FenceAsset, MIN_MASK_COVERAGE};
use crate::error::{Error, Result};
use crate::image::{Image, MaskImage};

/// Sampling ranges. Defaults are moderate and our own choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentRanges {
    /// Rotation drawn from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Log-uniform scale range.
    pub scale: [f64; 2],
    /// Translation drawn from `[-translate_px, translate_px]` per axis.
    pub translate_px: f64,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    /// Additive brightness offset range.
    pub brightness: f64,
    /// Contrast factor drawn from `[1 - contrast, 1 + contrast]`.
    pub contrast: f64,
    /// Hue rotation range in degrees.
    pub hue_deg: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self {
            rotation_deg: 15.0,
            scale: [0.8, 1.25],
            translate_px: 32.0,
            flip_horizontal: true,
            flip_vertical: false,
            brightness: 0.1,
            contrast: 0.2,
            hue_deg: 10.0,
        }
    }
}

impl AugmentRanges {
    /// Ranges that always produce the identity.
    pub fn none() -> Self {
        Self {
            rotation_deg: 0.0,
            scale: [1.0, 1.0],
            translate_px: 0.0,
            flip_horizontal: false,
            flip_vertical: false,
            brightness: 0.0,
            contrast: 0.0,
            hue_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.rotation_deg, self.translate_px, self.brightness, self.contrast, self.hue_deg];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("augmentation ranges must be finite and >= 0".into()));
        }
        let [lo, hi] = self.scale;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        if self.contrast >= 1.0 {
            return Err(Error::InvalidArgument("contrast range must be < 1".into()));
        }
        Ok(())
    }
}

/// Geometric part, applied about the image center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeomParams {
    pub rotation_deg: f64,
    pub scale: f64,
    pub translate: [f64; 2],
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
}

impl GeomParams {
    pub fn identity() -> Self {
        Self { rotation_deg: 0.0, scale: 1.0, translate: [0.0, 0.0], flip_horizontal: false, flip_vertical: false }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// Maps an output pixel to its source position (inverse transform).
    fn source(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (dx, dy) = (x - cx - self.translate[0], y - cy - self.translate[1]);
        // inverse rotation, then inverse scale, then flips
        let mut u = (c * dx + s * dy) / self.scale;
        let mut v = (-s * dx + c * dy) / self.scale;
        if self.flip_horizontal {
            u = -u;
        }
        if self.flip_vertical {
            v = -v;
        }
        (u + cx, v + cy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorParams {
    pub brightness: f64,
    pub contrast: f64,
    pub hue_deg: f64,
}

impl ColorParams {
    pub fn identity() -> Self {
        Self { brightness: 0.0, contrast: 1.0, hue_deg: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub geometry: GeomParams,
    pub color: ColorParams,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

impl AugmentParams {
    /// Draws parameters; identical `(ranges, seed)` give identical params.
    pub fn sample(ranges: &AugmentRanges, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = ranges.rotation_deg;
        let [s0, s1] = ranges.scale;
        let t = ranges.translate_px;
        let geometry = GeomParams {
            rotation_deg: uniform(&mut rng, -r, r),
            scale: uniform(&mut rng, s0.ln(), s1.ln()).exp(),
            translate: [uniform(&mut rng, -t, t), uniform(&mut rng, -t, t)],
            flip_horizontal: ranges.flip_horizontal && rng.gen_bool(0.5),
            flip_vertical: ranges.flip_vertical && rng.gen_bool(0.5),
        };
        let color = ColorParams {
            brightness: uniform(&mut rng, -ranges.brightness, ranges.brightness),
            contrast: 1.0 + uniform(&mut rng, -ranges.contrast, ranges.contrast),
            hue_deg: uniform(&mut rng, -ranges.hue_deg, ranges.hue_deg),
        };
        // normalize signed zeros so "all ranges zero" is recognisably identity
        let mut p = Self { geometry, color };
        let unsign = |v: &mut f64| {
            if *v == 0.0 {
                *v = 0.0;
            }
        };
        unsign(&mut p.geometry.rotation_deg);
        unsign(&mut p.geometry.translate[0]);
        unsign(&mut p.geometry.translate[1]);
        unsign(&mut p.color.brightness);
        unsign(&mut p.color.hue_deg);
        p
    }
}

/// Applies the geometric transform to a mask (nearest neighbour, zero
/// outside the source).
pub fn apply_geometry_mask(mask: &MaskImage, g: &GeomParams) -> MaskImage {
    if g.is_identity() {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = g.source(x as f64, y as f64, cx, cy);
            let (ui, vi) = (u.round(), v.round());
            if ui >= 0.0 && vi >= 0.0 && (ui as usize) < w && (vi as usize) < h {
                out[y * w + x] = mask.get(ui as usize, vi as usize);
            }
        }
    }
    MaskImage::new(w, h, out).expect("nearest sampling keeps mask values")
}

/// Applies the geometric transform to an image (bilinear, edge-clamped).
pub fn apply_geometry_image(img: &Image, g: &GeomParams) -> Image {
    if g.is_identity() {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut data = vec![0.0f32; img.data().len()];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = g.source(x as f64, y as f64, cx, cy);
            let u = u.clamp(0.0, (w - 1) as f64);
            let v = v.clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (u.floor() as usize, v.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (u - x0 as f64, v - y0 as f64);
            for c in 0..img.channels() {
                let p = img.plane(c);
                let top = p[y0 * w + x0] as f64 * (1.0 - fx) + p[y0 * w + x1] as f64 * fx;
                let bot = p[y1 * w + x0] as f64 * (1.0 - fx) + p[y1 * w + x1] as f64 * fx;
                data[c * w * h + y * w + x] = (top * (1.0 - fy) + bot * fy) as f32;
            }
        }
    }
    Image::from_clamped(w, h, img.channels(), data).expect("bilinear sampling is finite")
}

/// Brightness/contrast about mid-gray, then hue rotation about the gray
/// axis; the result is clamped to `[0, 1]`.
pub fn apply_color(img: &Image, c: &ColorParams) -> Result<Image> {
    if *c == ColorParams::identity() {
        return Ok(img.clone());
    }
    if img.channels() != 3 {
        return Err(Error::Channels("color jitter needs an RGB texture".into()));
    }
    let (s, co) = c.hue_deg.to_radians().sin_cos();
    let k = 1.0 / 3.0;
    let q = (1.0f64 / 3.0).sqrt();
    // Rodrigues rotation about (1,1,1)/sqrt(3)
    let m = [
        [co + (1.0 - co) * k, (1.0 - co) * k - q * s, (1.0 - co) * k + q * s],
        [(1.0 - co) * k + q * s, co + (1.0 - co) * k, (1.0 - co) * k - q * s],
        [(1.0 - co) * k - q * s, (1.0 - co) * k + q * s, co + (1.0 - co) * k],
    ];
    let n = img.plane_len();
    let mut data = vec![0.0f32; 3 * n];
    for i in 0..n {
        let rgb: [f64; 3] =
            std::array::from_fn(|ch| (img.plane(ch)[i] as f64 - 0.5) * c.contrast + 0.5 + c.brightness);
        for (ch, row) in m.iter().enumerate() {
            data[ch * n + i] = (row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]) as f32;
        }
    }
    Image::from_clamped(img.width(), img.height(), 3, data)
}

/// Augments a (frame-sized) asset. Geometry is shared by texture and mask,
/// color only touches the texture. Fails with `DegenerateMask` when the
/// transformed mask is nearly empty.
pub fn augment_fence(asset: &FenceAsset, ranges: &AugmentRanges, seed: u64) -> Result<(FenceAsset, AugmentParams)> {
    let params = AugmentParams::sample(ranges, seed);
    let out = apply_params(asset, &params)?;
    let coverage = out.mask().coverage();
    if coverage < MIN_MASK_COVERAGE {
        return Err(Error::DegenerateMask { coverage });
    }
    Ok((out, params))
}

/// Applies explicit parameters.
pub fn apply_params(asset: &FenceAsset, p: &AugmentParams) -> Result<FenceAsset> {
    let mask = apply_geometry_mask(asset.mask(), &p.geometry);
    let texture = apply_color(&apply_geometry_image(asset.texture(), &p.geometry), &p.color)?;
    FenceAsset::new(asset.id.clone(), texture, mask)
}
