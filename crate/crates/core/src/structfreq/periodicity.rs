use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::fft2_inplace;
use crate::image::Image;

/// Harmonics tracked per fundamental (including the fundamental itself).
const HARMONICS: i64 = 4;
/// Windows whose mean-removed signal has lower mean square score zero.
const SILENT: f64 = 1e-12;

/// Periodic Hann taper of length `n`.
fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// Score of one square patch: the fraction of non-DC spectral energy that
/// falls on the harmonic series of its two dominant fundamentals.
///
/// The strongest non-DC bin is the first fundamental. The strongest bin
/// not yet claimed is the second, which lets a crossing grid fence register
/// both of its directions. Each harmonic `m k` (`m = 1..=4`, both signs)
/// claims its 3x3 bin neighbourhood to absorb window leakage.
fn window_score(patch: &[f64], n: usize, taper: &[f64]) -> f64 {
    let mean = patch.iter().sum::<f64>() / patch.len() as f64;
    let ms = patch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / patch.len() as f64;
    if ms < SILENT {
        return 0.0;
    }
    let mut buf: Vec<Complex64> = patch
        .iter()
        .enumerate()
        .map(|(i, v)| Complex64::new((v - mean) * taper[i / n] * taper[i % n], 0.0))
        .collect();
    fft2_inplace(&mut buf, n, n, false);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().skip(1).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let signed = |k: usize| if 2 * k > n { k as i64 - n as i64 } else { k as i64 };
    let half = (n / 2) as i64;
    let mut claimed = vec![false; n * n];
    claimed[0] = true;
    for _ in 0..2 {
        let Some(peak) = (1..n * n).filter(|&i| !claimed[i]).max_by(|&a, &b| power[a].total_cmp(&power[b])) else {
            break;
        };
        let (fy, fx) = (signed(peak / n), signed(peak % n));
        for m in -HARMONICS..=HARMONICS {
            let (hy, hx) = (m * fy, m * fx);
            if m == 0 || hy.abs() > half || hx.abs() > half {
                continue;
            }
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let y = (hy + dy).rem_euclid(n as i64) as usize;
                    let x = (hx + dx).rem_euclid(n as i64) as usize;
                    claimed[y * n + x] = true;
                }
            }
        }
    }
    claimed[0] = false;
    let on: f64 = power.iter().zip(&claimed).filter(|(_, &c)| c).map(|(p, _)| p).sum();
    (on / total).clamp(0.0, 1.0)
}

/// Window origins along one axis: hop `window / 2`, plus a final window
/// flush with the far edge when the hops do not land there.
fn origins(len: usize, window: usize) -> Vec<usize> {
    let hop = (window / 2).max(1);
    let mut v: Vec<usize> = (0..=len - window).step_by(hop).collect();
    if *v.last().unwrap() != len - window {
        v.push(len - window);
    }
    v
}

/// Linear interpolation weights of coordinate `p` between sorted centres.
fn bracket(centres: &[f64], p: f64) -> (usize, usize, f64) {
    if p <= centres[0] {
        return (0, 0, 0.0);
    }
    let last = centres.len() - 1;
    if p >= centres[last] {
        return (last, last, 0.0);
    }
    let j = centres.partition_point(|&c| c <= p) - 1;
    (j, j + 1, (p - centres[j]) / (centres[j + 1] - centres[j]))
}

/// Local periodicity in `[0, 1]`.
///
/// Hann-tapered `window x window` patches are taken with a half-window hop.
/// Each patch scores the share of its non-DC energy on the dominant harmonic
/// series. The per-patch scores are bilinearly interpolated between patch
/// centres (and held constant beyond the outermost centres).
pub fn periodicity_score(gray: &Image, window: usize) -> Result<Image> {
    if gray.channels() != 1 {
        return Err(Error::Channels("periodicity expects a 1-channel image".into()));
    }
    if !window.is_power_of_two() || window < 4 {
        return Err(Error::InvalidArgument(format!("window must be a power of two >= 4, got {window}")));
    }
    let (w, h) = (gray.width(), gray.height());
    if window > w || window > h {
        return Err(Error::Dimensions(format!("window {window} exceeds image {w}x{h}")));
    }
    let taper = hann(window);
    let (ox, oy) = (origins(w, window), origins(h, window));
    let data = gray.data();
    let scores: Vec<f64> = (0..ox.len() * oy.len())
        .into_par_iter()
        .map(|k| {
            let (x0, y0) = (ox[k % ox.len()], oy[k / ox.len()]);
            let mut patch = Vec::with_capacity(window * window);
            for y in y0..y0 + window {
                patch.extend(data[y * w + x0..y * w + x0 + window].iter().map(|&v| v as f64));
            }
            window_score(&patch, window, &taper)
        })
        .collect();
    let centre = |o: &[usize]| o.iter().map(|&v| v as f64 + (window as f64 - 1.0) / 2.0).collect::<Vec<_>>();
    let (cx, cy) = (centre(&ox), centre(&oy));
    let nx = ox.len();
    let xb: Vec<_> = (0..w).map(|x| bracket(&cx, x as f64)).collect();
    Image::from_fn(w, h, 1, |_, x, y| {
        let (y0, y1, ty) = bracket(&cy, y as f64);
        let (x0, x1, tx) = xb[x];
        let s = |i: usize, j: usize| scores[i * nx + j];
        let top = s(y0, x0) * (1.0 - tx) + s(y0, x1) * tx;
        let bot = s(y1, x0) * (1.0 - tx) + s(y1, x1) * tx;
        (top * (1.0 - ty) + bot * ty) as f32
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grating(w: usize, h: usize, period: f64, angle: f64, phase: f64) -> Image {
        let (c, s) = (angle.cos(), angle.sin());
        Image::from_fn(w, h, 1, |_, x, y| {
            (0.5 + 0.4 * (2.0 * PI * (c * x as f64 + s * y as f64) / period + phase).sin()) as f32
        })
        .unwrap()
    }

    #[test]
    fn gratings_score_high_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..12 {
            let period = rng.gen_range(4.0..16.0);
            let angle = rng.gen_range(0.0..PI);
            let img = grating(96, 80, period, angle, rng.gen_range(0.0..2.0 * PI));
            let s = periodicity_score(&img, 32).unwrap();
            let min = s.data().iter().copied().fold(f32::INFINITY, f32::min);
            assert!(min > 0.8, "period {period:.2} angle {angle:.2}: min {min}");
        }
    }

    #[test]
    fn white_noise_scores_low() {
        let mut means = Vec::new();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = Image::from_fn(64, 64, 1, |_, _, _| rng.gen()).unwrap();
            means.push(periodicity_score(&img, 32).unwrap().mean());
        }
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let sd = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / means.len() as f64).sqrt();
        assert!(mean < 0.2, "mean {mean}");
        assert!(mean + 3.0 * sd < 0.2, "mean + 3 sd {}", mean + 3.0 * sd);
    }

    #[test]
    fn constant_is_zero() {
        let s = periodicity_score(&Image::filled(40, 40, 1, 0.3).unwrap(), 16).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn argument_checks() {
        let img = Image::filled(40, 20, 1, 0.3).unwrap();
        assert!(periodicity_score(&img, 24).is_err());
        assert!(periodicity_score(&img, 32).is_err());
        assert!(periodicity_score(&Image::filled(8, 8, 3, 0.3).unwrap(), 4).is_err());
    }

    #[test]
    fn origins_cover_the_edge() {
        assert_eq!(origins(40, 16), vec![0, 8, 16, 24]);
        assert_eq!(origins(44, 16), vec![0, 8, 16, 24, 28]);
        assert_eq!(origins(16, 16), vec![0]);
    }
}
