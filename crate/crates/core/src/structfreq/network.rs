use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::Conv2d;
use super::ffc::{ffc_block, FfcWeights};
use super::sam::{sam_fuse, SamWeights};
use super::tensor::FeatureTensor;
use crate::costvol::PyramidLevel;
use crate::error::{io_err, Error, Result};
use crate::image::pfm::{read_pfm, write_pfm};
use crate::image::{Image, MaskImage, Raster};

/// Encoder stream widths at 1/2, 1/4 and 1/8 resolution.
pub const WIDTHS: [usize; 3] = [8, 16, 32];
/// Channels of the disparity features fed to the attention gates
/// (disparity, confidence, peak score).
pub const DISP_CHANNELS: usize = 3;
const WEIGHTS_FORMAT: u32 = 1;
const HEADER: &str = "weights.json";

/// Global share of every stream; half the channels are spectral.
fn global(c: usize) -> usize {
    c / 2
}

/// All parameters of the toy segmentation network.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqDpWeights {
    pub seed: u64,
    pub encoder: [FfcWeights; 3],
    pub sam: [SamWeights; 3],
    pub decoder: [FfcWeights; 3],
    /// 1x1 projection to the mask logit.
    pub head: Conv2d,
}

impl FreqDpWeights {
    /// Deterministic He-uniform weights drawn from a ChaCha stream.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a, b, c] = WIDTHS;
        let encoder = [
            FfcWeights::random(3, 0, a, global(a), &mut rng),
            FfcWeights::random(a, global(a), b, global(b), &mut rng),
            FfcWeights::random(b, global(b), c, global(c), &mut rng),
        ];
        let sam = WIDTHS.map(|w| SamWeights::random(w, DISP_CHANNELS, &mut rng));
        let decoder = [
            // 1/8 -> concat with the 1/4 skip
            FfcWeights::random(c, global(c), b, global(b), &mut rng),
            // 1/4 (b + b channels) -> concat with the 1/2 skip
            FfcWeights::random(2 * b, 2 * global(b), a, global(a), &mut rng),
            // 1/2 (a + a channels) -> full resolution
            FfcWeights::random(2 * a, 2 * global(a), a, global(a), &mut rng),
        ];
        let head = Conv2d::random(1, a, 1, &mut rng);
        Self { seed, encoder, sam, decoder, head }
    }

    /// Visits every parameter array with its name and shape.
    fn visit(&mut self, f: &mut dyn FnMut(String, Vec<usize>, &mut Vec<f32>)) {
        fn conv(name: &str, c: &mut Conv2d, f: &mut dyn FnMut(String, Vec<usize>, &mut Vec<f32>)) {
            f(format!("{name}.weight"), vec![c.c_out, c.c_in, c.k, c.k], &mut c.weight);
            f(format!("{name}.bias"), vec![c.c_out], &mut c.bias);
        }
        fn block(name: &str, b: &mut FfcWeights, f: &mut dyn FnMut(String, Vec<usize>, &mut Vec<f32>)) {
            conv(&format!("{name}.l2l"), &mut b.l2l, f);
            conv(&format!("{name}.g2l"), &mut b.g2l, f);
            conv(&format!("{name}.l2g"), &mut b.l2g, f);
            let s = &mut b.g2g;
            f(format!("{name}.g2g.blocks"), vec![s.freq_h, s.freq_w, s.c_out, s.c_in, 4], &mut s.blocks);
            f(format!("{name}.g2g.bias"), vec![s.c_out], &mut s.bias);
        }
        for (i, b) in self.encoder.iter_mut().enumerate() {
            block(&format!("enc{i}"), b, f);
        }
        for (i, s) in self.sam.iter_mut().enumerate() {
            f(format!("sam{i}.w"), vec![s.c_out, s.c_in], &mut s.w);
            f(format!("sam{i}.b"), vec![s.c_out], &mut s.b);
        }
        for (i, b) in self.decoder.iter_mut().enumerate() {
            block(&format!("dec{i}"), b, f);
        }
        conv("head", &mut self.head, f);
    }

    /// Writes `weights.json` plus one single-row PFM per non-empty parameter.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut params = Vec::new();
        let mut written = Vec::new();
        let mut err = None;
        self.clone().visit(&mut |name, shape, data| {
            let file = (!data.is_empty()).then(|| format!("{name}.pfm"));
            if let Some(file) = &file {
                let r = Raster { width: data.len(), height: 1, channels: 1, data: data.clone() };
                let path = dir.join(file);
                match write_pfm(&r, &path) {
                    Ok(()) => written.push(path),
                    Err(e) => err = err.take().or(Some(e)),
                }
            }
            params.push(ParamEntry { name, shape, file });
        });
        if let Some(e) = err {
            return Err(e);
        }
        let header = WeightsHeader {
            format: WEIGHTS_FORMAT,
            seed: self.seed,
            widths: WIDTHS,
            global_ratio: 0.5,
            params,
        };
        let path = dir.join(HEADER);
        let mut text = serde_json::to_string_pretty(&header)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err(&path))?;
        written.insert(0, path);
        Ok(written)
    }

    /// Reads weights written by [`FreqDpWeights::save`], checking every shape.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(HEADER);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let header: WeightsHeader = serde_json::from_str(&text)?;
        if header.format != WEIGHTS_FORMAT || header.widths != WIDTHS {
            return Err(Error::InvalidArgument("weights file describes a different network".into()));
        }
        let mut out = Self::seeded(header.seed);
        let mut err = None;
        let mut seen = 0;
        out.visit(&mut |name, shape, data| {
            let res = (|| {
                let entry = header
                    .params
                    .iter()
                    .find(|p| p.name == name)
                    .ok_or_else(|| Error::InvalidArgument(format!("weights file lacks {name}")))?;
                if entry.shape != shape {
                    return Err(Error::Dimensions(format!("{name}: shape {:?}, expected {shape:?}", entry.shape)));
                }
                match &entry.file {
                    None if data.is_empty() => {}
                    None => return Err(Error::InvalidArgument(format!("{name} has no payload"))),
                    Some(file) => {
                        let r = read_pfm(&dir.join(file))?;
                        if r.data.len() != data.len() || r.data.iter().any(|v| !v.is_finite()) {
                            return Err(Error::Dimensions(format!("{name}: payload does not match its shape")));
                        }
                        *data = r.data;
                    }
                }
                Ok(())
            })();
            seen += 1;
            if let Err(e) = res {
                err = err.take().or(Some(e));
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if seen != header.params.len() {
            return Err(Error::InvalidArgument("weights file has unexpected parameters".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsHeader {
    format: u32,
    seed: u64,
    widths: [usize; 3],
    global_ratio: f64,
    params: Vec<ParamEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    file: Option<String>,
}

/// Disparity, confidence and peak score of one pyramid level as a local
/// tensor.
pub fn disparity_tensor(level: &PyramidLevel) -> Result<FeatureTensor> {
    let planes = vec![level.disparity.data.clone(), level.confidence.data.clone(), level.max_score.data.clone()];
    FeatureTensor::from_planes(planes, level.height(), level.width(), 0)
}

/// Forward pass of the toy dual-cue network: three FFC encoder blocks with
/// 2x pooling, attention gating by the disparity pyramid at 1/2, 1/4 and
/// 1/8 resolution, three FFC decoder blocks with 2x upsampling and skip
/// connections, and a sigmoid head.
pub fn freqdp_forward(rgb: &Image, pyramid: &[PyramidLevel], weights: &FreqDpWeights) -> Result<MaskImage> {
    if rgb.channels() != 3 {
        return Err(Error::Channels("network expects an RGB image".into()));
    }
    let (w, h) = (rgb.width(), rgb.height());
    if w % 8 != 0 || h % 8 != 0 || w == 0 || h == 0 {
        return Err(Error::Dimensions(format!("network needs dims divisible by 8, got {w}x{h}")));
    }
    if pyramid.len() != 3 {
        return Err(Error::InvalidArgument(format!("need 3 pyramid levels, got {}", pyramid.len())));
    }
    for (l, level) in pyramid.iter().enumerate() {
        let s = 2 << l;
        if (level.width(), level.height()) != (w / s, h / s) {
            return Err(Error::Dimensions(format!(
                "pyramid level {l} is {}x{}, expected {}x{}",
                level.width(),
                level.height(),
                w / s,
                h / s
            )));
        }
    }
    let mut x = FeatureTensor::from_image(rgb);
    let mut skips = Vec::new();
    for (l, (block, gate)) in weights.encoder.iter().zip(&weights.sam).enumerate() {
        let y = ffc_block(&x, block)?.pool2()?;
        x = sam_fuse(&y, &disparity_tensor(&pyramid[l])?, gate)?;
        skips.push(x.clone());
    }
    // x is the 1/8 bottleneck; decoder blocks climb back up
    for (l, block) in weights.decoder.iter().enumerate() {
        let y = ffc_block(&x, block)?.upsample2();
        x = match skips.len().checked_sub(l + 2) {
            Some(i) => FeatureTensor::concat(&y, &skips[i])?,
            None => y,
        };
    }
    let planes: Vec<&[f32]> = (0..x.channels()).map(|c| x.plane(c)).collect();
    let logit = weights.head.apply(&planes, h, w)?.remove(0);
    MaskImage::new(w, h, logit.into_iter().map(|v| (1.0 / (1.0 + (-v).exp())) as f32).collect())
}
