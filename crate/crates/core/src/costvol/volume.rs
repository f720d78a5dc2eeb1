use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use crate::dpform::reflect;
use crate::error::{Error, Result};
use crate::image::Raster;
use crate::ops::pool2;

/// Matching scores `C(p, d)` for non-negative disparities `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    disparities: Vec<f64>,
    width: usize,
    height: usize,
    /// Disparity-major: plane `i` holds `C(., disparities[i])`.
    scores: Vec<f32>,
}

impl CostVolume {
    pub fn new(disparities: Vec<f64>, width: usize, height: usize, scores: Vec<f32>) -> Result<Self> {
        if disparities.is_empty() || disparities[0] != 0.0 || disparities.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidArgument("disparities must start at 0 and strictly increase".into()));
        }
        if scores.len() != disparities.len() * width * height {
            return Err(Error::Dimensions("cost volume size mismatch".into()));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("cost volume scores must be finite".into()));
        }
        Ok(Self { disparities, width, height, scores })
    }

    pub fn disparities(&self) -> &[f64] {
        &self.disparities
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> usize {
        self.disparities.len()
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn plane(&self, i: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.scores[i * n..(i + 1) * n]
    }

    pub fn at(&self, i: usize, x: usize, y: usize) -> f32 {
        self.scores[(i * self.height + y) * self.width + x]
    }

    /// Score profile over disparities at one pixel.
    pub fn profile(&self, x: usize, y: usize) -> Vec<f32> {
        (0..self.depth()).map(|i| self.at(i, x, y)).collect()
    }

    /// The volume as a PFM-ready stack (one channel per disparity).
    pub fn to_raster(&self) -> Raster {
        Raster { width: self.width, height: self.height, channels: self.depth(), data: self.scores.clone() }
    }
}

/// Shifts every row of every channel by `d` pixels (`out(x) = in(x - d)`,
/// circularly) with a frequency-domain phase ramp. The Nyquist bin of an
/// even-length row is weighted by `cos(pi d)` so the output stays real.
pub fn phase_shift(feat: &FeatureMap, d: f64) -> Result<FeatureMap> {
    let n = feat.width;
    if !(d.is_finite() && d.abs() <= n as f64 / 2.0) {
        return Err(Error::InvalidArgument(format!("shift {d} exceeds half the row length {n}")));
    }
    let ramp = shift_ramp(n, d);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let rows = feat.channels * feat.height;
    let mut data = vec![0.0f32; feat.data.len()];
    data.par_chunks_mut(n).zip(feat.data.par_chunks(n)).with_min_len(16).for_each_init(
        || (vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()]),
        |(buf, scratch), (dst, src)| {
            for (b, &s) in buf.iter_mut().zip(src) {
                *b = Complex64::new(s as f64, 0.0);
            }
            fwd.process_with_scratch(buf, scratch);
            for (b, r) in buf.iter_mut().zip(&ramp) {
                *b *= r;
            }
            inv.process_with_scratch(buf, scratch);
            for (o, b) in dst.iter_mut().zip(buf.iter()) {
                *o = (b.re / n as f64) as f32;
            }
        },
    );
    debug_assert_eq!(rows * n, data.len());
    FeatureMap::new(feat.channels, feat.width, feat.height, data)
}

fn shift_ramp(n: usize, d: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            if n % 2 == 0 && 2 * k == n {
                Complex64::new((std::f64::consts::PI * d).cos(), 0.0)
            } else {
                let f = crate::fft::signed_freq(k, n);
                Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * d / n as f64)
            }
        })
        .collect()
}

/// The disparity grid `0, step, 2 step, ...` up to `dmax` inclusive.
pub fn disparity_grid(dmax: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) || !(dmax >= 0.0 && dmax.is_finite()) {
        return Err(Error::InvalidArgument(format!("need step > 0 and dmax >= 0, got {step}, {dmax}")));
    }
    let count = (dmax / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| i as f64 * step).collect())
}

/// Largest per-pixel feature norm of a map.
fn max_norm(f: &FeatureMap) -> f64 {
    let n = f.width * f.height;
    (0..n)
        .map(|p| (0..f.channels).map(|c| (f.plane(c)[p] as f64).powi(2)).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// `C(p, d) = <F_L(p), F_R(p + d)>` for `d` in `{0, step, ..., dmax}`.
///
/// The right features are phase-shifted by `-d`, and each shifted vector is
/// rescaled to `rho = max_q |F_R(q)|` before the inner product. Band-limited
/// interpolation changes vector lengths between samples (overshoot or
/// sag), which would otherwise let a fractional shift outscore an exact
/// match. With the rescaling, `C(p, d) = rho <F_L(p), S/|S|>`: an exact
/// match is always the maximum, and `C(p, d) <= |F_L(p)| rho` for every `d`.
/// Shifted vectors shorter than `1e-6 rho` score zero.
pub fn build_cost_volume(left: &FeatureMap, right: &FeatureMap, dmax: f64, step: f64) -> Result<CostVolume> {
    if !left.same_shape(right) {
        return Err(Error::Dimensions("left and right features differ in shape".into()));
    }
    let disparities = disparity_grid(dmax, step)?;
    if dmax > left.width as f64 / 2.0 {
        return Err(Error::InvalidArgument(format!("dmax {dmax} exceeds half the feature width")));
    }
    let n = left.width * left.height;
    let rho = max_norm(right);
    let planes: Vec<Vec<f32>> = disparities
        .par_iter()
        .map(|&d| {
            let shifted = phase_shift(right, -d)?;
            let mut dot = vec![0.0f64; n];
            let mut sq = vec![0.0f64; n];
            for c in 0..left.channels {
                for (((a, q), &l), &r) in dot.iter_mut().zip(sq.iter_mut()).zip(left.plane(c)).zip(shifted.plane(c)) {
                    *a += l as f64 * r as f64;
                    *q += r as f64 * r as f64;
                }
            }
            Ok(dot
                .into_iter()
                .zip(sq)
                .map(|(a, q)| {
                    let len = q.sqrt();
                    if len > 1e-6 * rho {
                        (a * rho / len) as f32
                    } else {
                        0.0
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    CostVolume::new(disparities, left.width, left.height, planes.concat())
}

/// Box average over `(x, y, d)` with an odd `window`, reflecting at the
/// volume boundaries.
pub fn aggregate_cost(vol: &CostVolume, window: usize) -> Result<CostVolume> {
    if window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("aggregation window must be odd, got {window}")));
    }
    let (w, h, depth) = (vol.width, vol.height, vol.depth());
    if window > w || window > h || window > depth {
        return Err(Error::InvalidArgument(format!(
            "aggregation window {window} exceeds volume dims {w}x{h}x{depth}"
        )));
    }
    if window == 1 {
        return Ok(vol.clone());
    }
    let n = w * h;
    let r = (window / 2) as i64;
    let inv = 1.0 / window as f64;
    // spatial box per plane
    let spatial: Vec<Vec<f64>> = (0..depth)
        .into_par_iter()
        .map(|i| {
            let p: Vec<f64> = vol.plane(i).iter().map(|&v| v as f64).collect();
            crate::ops::box_mean(&p, w, h, window)
        })
        .collect();
    // box along d
    let mut scores = vec![0.0f32; depth * n];
    scores.par_chunks_mut(n).enumerate().for_each(|(i, dst)| {
        let mut acc = vec![0.0f64; n];
        for k in -r..=r {
            let j = reflect(i as i64 + k, depth);
            for (a, s) in acc.iter_mut().zip(&spatial[j]) {
                *a += s;
            }
        }
        for (d, a) in dst.iter_mut().zip(acc) {
            *d = (a * inv) as f32;
        }
    });
    CostVolume::new(vol.disparities.clone(), w, h, scores)
}

/// Single-channel float map (disparity, confidence, scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl ScalarMap {
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn to_raster(&self) -> Raster {
        Raster { width: self.width, height: self.height, channels: 1, data: self.data.clone() }
    }

    /// 2x2 average pooling (reflect-padded for odd sizes).
    pub fn pooled(&self) -> ScalarMap {
        let p: Vec<f64> = self.data.iter().map(|&v| v as f64).collect();
        let (o, w, h) = pool2(&p, self.width, self.height);
        ScalarMap { width: w, height: h, data: o.into_iter().map(|v| v as f32).collect() }
    }
}

pub type DisparityMap = ScalarMap;
pub type ConfidenceMap = ScalarMap;

/// Sub-pixel peak and confidence for one score profile.
///
/// The peak is the first maximum, refined by a parabola through it and its
/// neighbours. Confidence is `1 - C2/C1`, where `C1` is the peak score and
/// `C2` the best score outside the peak's lobe (the run over which scores
/// fall monotonically away from the peak); if the lobe spans the whole
/// range, its end values stand in for `C2`.
pub fn refine_peak(s: &[f32], disparities: &[f64]) -> (f64, f64) {
    let d = s.len();
    let mut best = 0;
    for i in 1..d {
        if s[i] > s[best] {
            best = i;
        }
    }
    let c1 = s[best] as f64;
    let mut disp = disparities[best];
    if best > 0 && best + 1 < d {
        let (a, b, c) = (s[best - 1] as f64, c1, s[best + 1] as f64);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            let step = if delta >= 0.0 {
                disparities[best + 1] - disparities[best]
            } else {
                disparities[best] - disparities[best - 1]
            };
            disp += delta * step;
        }
    }
    if d < 2 || c1 <= 0.0 {
        return (disp, 0.0);
    }
    let mut lo = best;
    while lo > 0 && s[lo - 1] <= s[lo] {
        lo -= 1;
    }
    let mut hi = best;
    while hi + 1 < d && s[hi + 1] <= s[hi] {
        hi += 1;
    }
    let outside = s[..lo].iter().chain(&s[hi + 1..]).copied().fold(f32::NEG_INFINITY, f32::max);
    let c2 = if outside.is_finite() {
        outside as f64
    } else {
        // single lobe: compare against its ends (excluding the peak itself)
        [lo, hi].iter().filter(|&&i| i != best).map(|&i| s[i] as f64).fold(f64::NEG_INFINITY, f64::max)
    };
    let conf = if c2.is_finite() { (1.0 - c2 / c1).clamp(0.0, 1.0) } else { 0.0 };
    (disp, conf)
}

/// Per-pixel sub-pixel argmax and confidence.
pub fn disparity_argmax(vol: &CostVolume) -> (DisparityMap, ConfidenceMap) {
    let (w, h) = (vol.width, vol.height);
    let pairs: Vec<(f32, f32)> = (0..w * h)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let prof: Vec<f32> = (0..vol.depth()).map(|k| vol.scores[k * w * h + i]).collect();
            let (d, c) = refine_peak(&prof, &vol.disparities);
            (d as f32, c as f32)
        })
        .collect();
    let (d, c): (Vec<f32>, Vec<f32>) = pairs.into_iter().unzip();
    (ScalarMap { width: w, height: h, data: d }, ScalarMap { width: w, height: h, data: c })
}

/// One pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub disparity: ScalarMap,
    pub confidence: ScalarMap,
    pub max_score: ScalarMap,
}

impl PyramidLevel {
    pub fn width(&self) -> usize {
        self.disparity.width
    }

    pub fn height(&self) -> usize {
        self.disparity.height
    }

    fn pooled(&self) -> PyramidLevel {
        PyramidLevel {
            disparity: self.disparity.pooled(),
            confidence: self.confidence.pooled(),
            max_score: self.max_score.pooled(),
        }
    }
}

/// Disparity features at volume resolution (1/2 of the image), 1/4 and 1/8.
pub fn disp_pyramid(vol: &CostVolume) -> Vec<PyramidLevel> {
    let (disparity, confidence) = disparity_argmax(vol);
    let n = vol.width * vol.height;
    let max_score: Vec<f32> =
        (0..n).map(|i| (0..vol.depth()).map(|k| vol.scores[k * n + i]).fold(f32::NEG_INFINITY, f32::max)).collect();
    let base = PyramidLevel {
        disparity,
        confidence,
        max_score: ScalarMap { width: vol.width, height: vol.height, data: max_score },
    };
    let l1 = base.pooled();
    let l2 = l1.pooled();
    vec![base, l1, l2]
}
