use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub(crate) fn gaussian_taps() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW).map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(p: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * p[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f32], b: &[f32], w: usize, h: usize, taps: &[f64]) -> f64 {
    let (c1, c2) = (K1 * K1, K2 * K2);
    let fa: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let fb: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(&fa, w, h, taps);
    let mu_b = filter_valid(&fb, w, h, taps);
    let aa = filter_valid(&prod(&fa, &fa), w, h, taps);
    let bb = filter_valid(&prod(&fb, &fb), w, h, taps);
    let ab = filter_valid(&prod(&fa, &fb), w, h, taps);
    let n = mu_a.len();
    (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum::<f64>()
        / n as f64
}

/// Windowed SSIM (peak 1): 11x11 Gaussian window with sigma 1.5, evaluated
/// at every position where the window fits, averaged over positions and
/// channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Dimensions("ssim needs images of equal shape".into()));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimensions(format!("ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}")));
    }
    let taps = gaussian_taps();
    let per: Vec<f64> = (0..a.channels()).into_par_iter().map(|c| ssim_plane(a.plane(c), b.plane(c), w, h, &taps)).collect();
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Literal sliding-window definition with a full 2-D weight table.
    fn naive(a: &Image, b: &Image) -> f64 {
        let t = gaussian_taps();
        let (w, h, k) = (a.width(), a.height(), SSIM_WINDOW);
        let (c1, c2) = (1e-4, 9e-4);
        let mut total = 0.0;
        let mut count = 0.0;
        for c in 0..a.channels() {
            for y0 in 0..=h - k {
                for x0 in 0..=w - k {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    for j in 0..k {
                        for i in 0..k {
                            let wt = t[i] * t[j];
                            ma += wt * a.get(c, x0 + i, y0 + j) as f64;
                            mb += wt * b.get(c, x0 + i, y0 + j) as f64;
                        }
                    }
                    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                    for j in 0..k {
                        for i in 0..k {
                            let wt = t[i] * t[j];
                            let da = a.get(c, x0 + i, y0 + j) as f64 - ma;
                            let db = b.get(c, x0 + i, y0 + j) as f64 - mb;
                            va += wt * da * da;
                            vb += wt * db * db;
                            cov += wt * da * db;
                        }
                    }
                    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    count += 1.0;
                }
            }
        }
        total / count
    }

    fn random(w: usize, h: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, c, |_, _, _| rng.gen()).unwrap()
    }

    #[test]
    fn identical_is_one() {
        let a = random(32, 24, 3, 1);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn constants_match_the_closed_form() {
        let a = Image::filled(16, 16, 1, 0.0).unwrap();
        let b = Image::filled(16, 16, 1, 1.0).unwrap();
        let c1 = 1e-4;
        assert!((ssim(&a, &b).unwrap() - c1 / (1.0 + c1)).abs() <= 1e-12);
    }

    #[test]
    fn matches_naive_reference() {
        for seed in 0..10 {
            let (a, b) = (random(16, 16, 1, seed), random(16, 16, 1, seed + 100));
            let (fast, slow) = (ssim(&a, &b).unwrap(), naive(&a, &b));
            assert!((fast - slow).abs() <= 1e-7, "{fast} vs {slow}");
        }
        let (a, b) = (random(20, 17, 3, 7), random(20, 17, 3, 8));
        assert!((ssim(&a, &b).unwrap() - naive(&a, &b)).abs() <= 1e-7);
    }

    #[test]
    fn symmetric_and_size_checked() {
        let (a, b) = (random(24, 24, 3, 3), random(24, 24, 3, 4));
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() <= 1e-9);
        assert!(ssim(&random(10, 30, 1, 0), &random(10, 30, 1, 1)).is_err());
        assert!(ssim(&a, &random(24, 24, 1, 1)).is_err());
    }
}
