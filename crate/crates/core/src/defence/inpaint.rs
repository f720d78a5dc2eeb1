use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, MaskImage};

/// Stop when no masked value moves by more than this in one sweep.
pub const INPAINT_TOLERANCE: f64 = 1e-4;
pub const INPAINT_MAX_ITERATIONS: usize = 2000;

/// Linear interpolation between the nearest known pixels along each row and
/// each column, averaged; a good starting point for the harmonic solve.
fn initial_fill(plane: &[f64], known: &[bool], w: usize, h: usize) -> Vec<f64> {
    let mut sum = plane.to_vec();
    let mut count = vec![0u32; w * h];
    let lines = |len: usize, at: &dyn Fn(usize) -> usize, sum: &mut Vec<f64>, count: &mut Vec<u32>| {
        let mut prev: Option<usize> = None;
        let mut k = 0;
        while k < len {
            if known[at(k)] {
                prev = Some(k);
                k += 1;
                continue;
            }
            let start = k;
            while k < len && !known[at(k)] {
                k += 1;
            }
            let next = (k < len).then_some(k);
            for j in start..k {
                let v = match (prev, next) {
                    (Some(a), Some(b)) => {
                        let t = (j - a) as f64 / (b - a) as f64;
                        plane[at(a)] * (1.0 - t) + plane[at(b)] * t
                    }
                    (Some(a), None) => plane[at(a)],
                    (None, Some(b)) => plane[at(b)],
                    (None, None) => continue,
                };
                let i = at(j);
                if count[i] == 0 {
                    sum[i] = 0.0;
                }
                sum[i] += v;
                count[i] += 1;
            }
        }
    };
    for y in 0..h {
        lines(w, &|x| y * w + x, &mut sum, &mut count);
    }
    for x in 0..w {
        lines(h, &|y| y * w + x, &mut sum, &mut count);
    }
    let fallback = {
        let (s, n) = plane.iter().zip(known).filter(|(_, &k)| k).fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        s / n.max(1) as f64
    };
    (0..w * h)
        .map(|i| match (known[i], count[i]) {
            (true, _) => plane[i],
            (false, 0) => fallback,
            (false, c) => sum[i] / c as f64,
        })
        .collect()
}

/// Longest run of unknown pixels along any row or column.
fn longest_run(known: &[bool], w: usize, h: usize) -> usize {
    let mut best = 0;
    for y in 0..h {
        let mut run = 0;
        for x in 0..w {
            run = if known[y * w + x] { 0 } else { run + 1 };
            best = best.max(run);
        }
    }
    for x in 0..w {
        let mut run = 0;
        for y in 0..h {
            run = if known[y * w + x] { 0 } else { run + 1 };
            best = best.max(run);
        }
    }
    best
}

/// Red-black SOR on the masked pixels; each masked pixel relaxes towards the
/// mean of its in-image 4-neighbours (Dirichlet data from known pixels,
/// natural boundary at the frame edge).
fn harmonic_solve(u: &mut [f64], known: &[bool], w: usize, h: usize, omega: f64) -> usize {
    let colors: [Vec<usize>; 2] = {
        let mut c = [Vec::new(), Vec::new()];
        for i in (0..w * h).filter(|&i| !known[i]) {
            c[(i % w + i / w) % 2].push(i);
        }
        c
    };
    for iter in 1..=INPAINT_MAX_ITERATIONS {
        let mut worst = 0.0f64;
        for color in &colors {
            for &i in color {
                let (x, y) = (i % w, i / w);
                let (mut s, mut n) = (0.0, 0.0);
                if x > 0 {
                    s += u[i - 1];
                    n += 1.0;
                }
                if x + 1 < w {
                    s += u[i + 1];
                    n += 1.0;
                }
                if y > 0 {
                    s += u[i - w];
                    n += 1.0;
                }
                if y + 1 < h {
                    s += u[i + w];
                    n += 1.0;
                }
                let delta = omega * (s / n - u[i]);
                u[i] += delta;
                worst = worst.max(delta.abs());
            }
        }
        if worst < INPAINT_TOLERANCE {
            return iter;
        }
    }
    INPAINT_MAX_ITERATIONS
}

/// Harmonic (Laplace) fill of the masked pixels of every channel.
///
/// Unmasked pixels are copied bit-exactly. Masked pixels start from row and
/// column interpolation and are relaxed by successive over-relaxation until
/// no value moves by more than 1e-4 in a sweep, or 2000 sweeps have run.
pub fn inpaint(img: &Image, mask: &MaskImage) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if (mask.width(), mask.height()) != (w, h) {
        return Err(Error::Dimensions("mask and image differ in size".into()));
    }
    if !mask.is_binary() {
        return Err(Error::InvalidArgument("inpainting needs a binary mask".into()));
    }
    let known: Vec<bool> = mask.data().iter().map(|&v| v == 0.0).collect();
    if known.iter().all(|&k| k) {
        return Ok(img.clone());
    }
    if !known.iter().any(|&k| k) {
        return Err(Error::FullMask);
    }
    let l = longest_run(&known, w, h) as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (l + 1.0)).sin());
    let planes: Vec<Vec<f32>> = (0..img.channels())
        .into_par_iter()
        .map(|c| {
            let src = img.plane(c);
            let plane: Vec<f64> = src.iter().map(|&v| v as f64).collect();
            let mut u = initial_fill(&plane, &known, w, h);
            harmonic_solve(&mut u, &known, w, h, omega);
            src.iter().zip(&u).zip(&known).map(|((&s, &v), &k)| if k { s } else { v as f32 }).collect()
        })
        .collect();
    Image::from_clamped(w, h, img.channels(), planes.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_mask(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> MaskImage {
        let bits: Vec<bool> = (0..w * h)
            .map(|i| ((i % w) as f64 - cx).powi(2) + ((i / w) as f64 - cy).powi(2) <= r * r)
            .collect();
        MaskImage::from_bools(w, h, &bits).unwrap()
    }

    #[test]
    fn empty_mask_is_identity() {
        let img = Image::from_fn(9, 7, 3, |c, x, y| ((c + x * y) % 5) as f32 / 5.0).unwrap();
        assert_eq!(inpaint(&img, &MaskImage::zeros(9, 7)).unwrap(), img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = Image::filled(40, 30, 3, 0.42).unwrap();
        let out = inpaint(&img, &disc_mask(40, 30, 12.0, 20.0, 9.0)).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.42).abs() <= 1e-4));
    }

    #[test]
    fn linear_ramp_is_reproduced() {
        let img = Image::from_fn(64, 48, 1, |_, x, y| 0.1 + 0.01 * x as f32 + 0.005 * y as f32).unwrap();
        let mask = disc_mask(64, 48, 30.0, 22.0, 12.0);
        let out = inpaint(&img, &mask).unwrap();
        let worst = out.data().iter().zip(img.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn harmonic_fill_of_a_curved_boundary() {
        // x^2 - y^2 is harmonic; the discrete Laplacian reproduces it exactly
        let f = |x: f64, y: f64| 0.5 + ((x - 24.0).powi(2) - (y - 20.0).powi(2)) / 2000.0;
        let img = Image::from_fn(48, 40, 1, |_, x, y| f(x as f64, y as f64) as f32).unwrap();
        let out = inpaint(&img, &disc_mask(48, 40, 24.0, 20.0, 10.0)).unwrap();
        let worst = out.data().iter().zip(img.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst <= 2e-3, "{worst}");
    }

    #[test]
    fn unmasked_pixels_untouched_and_errors() {
        let img = Image::from_fn(30, 20, 3, |c, x, y| ((c * 7 + x * 3 + y * 5) % 13) as f32 / 13.0).unwrap();
        let mask = disc_mask(30, 20, 15.0, 10.0, 5.0);
        let out = inpaint(&img, &mask).unwrap();
        for c in 0..3 {
            for y in 0..20 {
                for x in 0..30 {
                    if !mask.is_set(x, y) {
                        assert_eq!(out.get(c, x, y).to_bits(), img.get(c, x, y).to_bits());
                    }
                }
            }
        }
        assert!(matches!(inpaint(&img, &MaskImage::from_bools(30, 20, &[true; 600]).unwrap()), Err(Error::FullMask)));
        assert!(inpaint(&img, &MaskImage::new(30, 20, vec![0.5; 600]).unwrap()).is_err());
        assert!(inpaint(&img, &MaskImage::zeros(3, 3)).is_err());
    }
}
