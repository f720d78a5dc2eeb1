//! Synthetic fence compositing.
//!
//! A fence asset (all-in-focus texture plus binary mask) is tiled to the
//! frame, augmented, placed at a random depth and blurred with the view's
//! PSF before being blended into a clean dual-pixel frame. The background is
//! assumed to be in focus and is never blurred.

mod augment;
mod dataset;
pub mod procedural;

pub use augment::{
    apply_color, apply_geometry_image, apply_geometry_mask, apply_params, augment_fence, AugmentParams, AugmentRanges, ColorParams, GeomParams};
pub use dataset::{
    extract_patches, PatchManifest, generate_dataset, load_assets, load_clean_frames, patch_count, patch_windows, split_counts,
    CleanFrame, DatasetManifest, Patch, PatchConfig, PatchRecord, SampleFiles, SampleRecord, Splits,
    MANIFEST_SCHEMA_VERSION,
};

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dpform::{blur_scale, patchwise_conv, DpGrids, GridShape, ParametricPsf, PsfGrid, ThinLens};
use crate::error::{Error, Result};
use crate::hashing::{derive_seed, substream};
use crate::image::{green_channel, DPFrame, Image, MaskImage};

/// Augmented masks covering less than this fraction are rejected.
pub const MIN_MASK_COVERAGE: f64 = 1e-3;
/// Augmentation attempts per sample before giving up.
pub const MAX_AUGMENT_ATTEMPTS: u32 = 10;

/// All-in-focus fence photograph with its segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct FenceAsset {
    pub id: String,
    texture: Image,
    mask: MaskImage,
}

impl FenceAsset {
    pub fn new(id: impl Into<String>, texture: Image, mask: MaskImage) -> Result<Self> {
        if texture.channels() != 3 {
            return Err(Error::Channels("fence texture must be RGB".into()));
        }
        if (texture.width(), texture.height()) != (mask.width(), mask.height()) {
            return Err(Error::Dimensions("fence texture and mask differ in size".into()));
        }
        if !mask.is_binary() {
            return Err(Error::Range("fence mask must be binary".into()));
        }
        Ok(Self { id: id.into(), texture, mask })
    }

    pub fn texture(&self) -> &Image {
        &self.texture
    }

    pub fn mask(&self) -> &MaskImage {
        &self.mask
    }

    pub fn width(&self) -> usize {
        self.texture.width()
    }

    pub fn height(&self) -> usize {
        self.texture.height()
    }

    /// Periodic tiling (or cropping) to `w x h`, starting at offset `phase`.
    pub fn tiled(&self, w: usize, h: usize, phase: [usize; 2]) -> FenceAsset {
        let (aw, ah) = (self.width(), self.height());
        let src = |x: usize, y: usize| ((y + phase[1]) % ah) * aw + (x + phase[0]) % aw;
        let mut tex = Vec::with_capacity(3 * w * h);
        for c in 0..3 {
            let p = self.texture.plane(c);
            for y in 0..h {
                tex.extend((0..w).map(|x| p[src(x, y)]));
            }
        }
        let m = self.mask.data();
        let mask: Vec<f32> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| m[src(x, y)]).collect();
        FenceAsset {
            id: self.id.clone(),
            texture: Image::new(w, h, 3, tex).expect("tiling keeps values in range"),
            mask: MaskImage::new(w, h, mask).expect("tiling keeps values in range"),
        }
    }
}

/// Optional calibrated PSF grids; when absent the parametric model is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedPsf {
    pub left: PathBuf,
    pub right: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Fence depth range in meters, sampled uniformly.
    pub depth_range_m: [f64; 2],
    pub lens: ThinLens,
    pub grid: GridShape,
    pub psf: ParametricPsf,
    pub calibrated_psf: Option<CalibratedPsf>,
    pub augment: AugmentRanges,
    pub base_seed: u64,
    /// Patch extraction for the training split; `None` disables it.
    pub patches: Option<PatchConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            depth_range_m: [0.10, 0.50],
            lens: ThinLens::default(),
            grid: GridShape::default(),
            psf: ParametricPsf::default(),
            calibrated_psf: None,
            augment: AugmentRanges::default(),
            base_seed: 0,
            patches: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.depth_range_m;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("depth range must satisfy 0 < min < max, got [{lo}, {hi}]")));
        }
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return Err(Error::InvalidArgument("psf grid needs at least one cell".into()));
        }
        self.lens.validate()?;
        self.augment.validate()?;
        if let Some(p) = &self.patches {
            p.validate()?;
        }
        Ok(())
    }
}

/// Per-sample seed.
pub fn sample_seed(config: &SynthConfig, index: u64) -> u64 {
    derive_seed(config.base_seed, index)
}

fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream(seed, label))
}

/// Uniform index in `0..n` from a labelled sub-stream of `seed`.
pub(crate) fn rng_index(seed: u64, label: &str, n: usize) -> usize {
    rng_for(seed, label).gen_range(0..n)
}

/// Fence depth of sample `index`, uniform over the configured range.
pub fn sample_depth(config: &SynthConfig, index: u64) -> f64 {
    let [lo, hi] = config.depth_range_m;
    let u: f64 = rng_for(sample_seed(config, index), "depth").gen();
    lo + (hi - lo) * u
}

/// Provenance of one synthesized sample: enough to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleProvenance {
    pub index: u64,
    pub seed: u64,
    pub depth_m: f64,
    pub alpha: f64,
    pub asset_id: String,
    pub tile_phase: [usize; 2],
    pub augmentation: AugmentParams,
    pub attempts: u32,
}

/// Result of compositing one fence into one frame.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub occluded: DPFrame,
    /// `M_C` blurred with the combined-view kernels.
    pub soft_mask: MaskImage,
    /// `soft_mask >= 0.5`.
    pub mask: MaskImage,
    pub provenance: SampleProvenance,
}

/// A validated config together with the loaded PSF source.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    config: SynthConfig,
    calibrated: Option<(PsfGrid, PsfGrid)>,
}

impl Synthesizer {
    pub fn new(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let calibrated = match &config.calibrated_psf {
            Some(c) => Some((PsfGrid::load(&c.left)?, PsfGrid::load(&c.right)?)),
            None => None,
        };
        Ok(Self { config, calibrated })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    /// View grids at blur scale `alpha`.
    pub fn grids(&self, alpha: f64) -> Result<DpGrids> {
        match &self.calibrated {
            Some((l, r)) => DpGrids::from_calibrated(l, r, alpha),
            None => self.config.psf.grids(alpha, self.config.grid),
        }
    }

    pub fn alpha(&self, depth_m: f64) -> Result<f64> {
        blur_scale(&self.config.lens, depth_m)
    }

    /// Tiles and augments the asset for sample `seed`, resampling rejected
    /// augmentations. Returns the asset, tile phase, params and attempts.
    fn prepare_asset(
        &self,
        asset: &FenceAsset,
        w: usize,
        h: usize,
        seed: u64,
    ) -> Result<(FenceAsset, [usize; 2], AugmentParams, u32)> {
        let mut rng = rng_for(seed, "tile");
        let phase = [rng.gen_range(0..asset.width()), rng.gen_range(0..asset.height())];
        let tiled = asset.tiled(w, h, phase);
        let mut last = Error::DegenerateMask { coverage: 0.0 };
        for attempt in 0..MAX_AUGMENT_ATTEMPTS {
            let aug_seed = substream(seed, &format!("augment/{attempt}"));
            match augment_fence(&tiled, &self.config.augment, aug_seed) {
                Ok((a, params)) => return Ok((a, phase, params, attempt + 1)),
                Err(e @ Error::DegenerateMask { .. }) => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    /// Composites `asset` into `clean` for sample `index`.
    pub fn synthesize_sample(&self, clean: &DPFrame, asset: &FenceAsset, index: u64) -> Result<SynthSample> {
        let seed = sample_seed(&self.config, index);
        let depth_m = sample_depth(&self.config, index);
        let alpha = self.alpha(depth_m)?;
        let (w, h) = (clean.width(), clean.height());
        let (fence, tile_phase, augmentation, attempts) = self.prepare_asset(asset, w, h, seed)?;
        let grids = self.grids(alpha)?;
        let (occluded, soft_mask) = composite(clean, &fence, &grids)?;
        let provenance = SampleProvenance {
            index,
            seed,
            depth_m,
            alpha,
            asset_id: asset.id.clone(),
            tile_phase,
            augmentation,
            attempts,
        };
        let mask = soft_mask.threshold(0.5);
        Ok(SynthSample { occluded, soft_mask, mask, provenance })
    }

    /// Recomputes the stored soft ground-truth mask from provenance alone.
    pub fn recompute_soft_mask(
        &self,
        asset: &FenceAsset,
        w: usize,
        h: usize,
        prov: &SampleProvenance,
    ) -> Result<MaskImage> {
        let tiled = asset.tiled(w, h, prov.tile_phase);
        let mask = augment::apply_geometry_mask(tiled.mask(), &prov.augmentation.geometry);
        let grids = self.grids(prov.alpha)?;
        MaskImage::from_image(&patchwise_conv(&mask.to_image(), &grids.combined)?)
    }
}

/// Blends `I_v (1 - M_blur) + I_blur M_blur` in f64; exact where
/// `M_blur` is 0 or 1.
fn blend(clean: &[f32], blurred: &[f32], m_blur: &[f32]) -> Vec<f32> {
    clean
        .iter()
        .zip(blurred)
        .zip(m_blur)
        .map(|((&i, &b), &m)| (i as f64 * (1.0 - m as f64) + b as f64 * m as f64) as f32)
        .collect()
}

/// Sharp composite `I (1 - M) + F M`.
fn paste(clean: &[f32], fence: &[f32], m: &[f32]) -> Vec<f32> {
    blend(clean, fence, m)
}

/// One view: sharp composite, blur of composite and mask, final blend.
fn composite_view(clean: &Image, fence: &Image, mask: &Image, grid: &PsfGrid) -> Result<(Image, Image)> {
    let (w, h, ch) = (clean.width(), clean.height(), clean.channels());
    let m = mask.plane(0);
    let mut sharp = Vec::with_capacity(clean.data().len());
    for c in 0..ch {
        sharp.extend(paste(clean.plane(c), fence.plane(c), m));
    }
    let blurred = patchwise_conv(&Image::new(w, h, ch, sharp)?, grid)?;
    let m_blur = patchwise_conv(mask, grid)?;
    let mut out = Vec::with_capacity(clean.data().len());
    for c in 0..ch {
        out.extend(blend(clean.plane(c), blurred.plane(c), m_blur.plane(0)));
    }
    Ok((Image::new(w, h, ch, out)?, m_blur))
}

/// Composites a frame-sized fence into a clean frame with the given grids.
/// Returns the occluded frame and the combined-view blurred mask.
pub fn composite(clean: &DPFrame, fence: &FenceAsset, grids: &DpGrids) -> Result<(DPFrame, MaskImage)> {
    if (clean.width(), clean.height()) != (fence.width(), fence.height()) {
        return Err(Error::Dimensions("fence must match the frame size".into()));
    }
    let mask = fence.mask().to_image();
    let gray = green_channel(fence.texture())?;
    let (left, _) = composite_view(&clean.left, &gray, &mask, &grids.left)?;
    let (right, _) = composite_view(&clean.right, &gray, &mask, &grids.right)?;
    let (combined, m_c) = composite_view(&clean.combined, fence.texture(), &mask, &grids.combined)?;
    Ok((DPFrame::new(left, right, combined)?, MaskImage::from_image(&m_c)?))
}
