//! Colour snapping of a coarse (fattened) mask.
//!
//! Window-based matching spreads the fence's disparity several pixels into
//! the background, so the coarse mask is a superset of the fence. Inside it,
//! each pixel is re-decided against two local colour models: background
//! `B`, the mean colour of a thin ring just outside the coarse mask, and
//! fence `F`, a two-means
//! centroid of the pixels inside it. A pixel `c` is fence when its position
//! `t = <c - B', F - B'> / |F - B'|^2` exceeds `level`, where `B'` is the
//! mean of the ring pixels within `LOCAL` pixels of `c` (the background is
//! rarely uniform across a window, and the shade right next to the fence is
//! what matters).
//!
//! With the defocus compositing used for synthesis, where both the mask and
//! the fence layer pass through the same blur, a pixel of blurred coverage
//! `m` sits at `t = m^2`; `level = 0.25` therefore splits at `m = 0.5`. Plain
//! alpha compositing would call for `level = 0.5`.
//!
//! A defocused edge cannot ramp for longer than the blur is wide. With the
//! disc-shaped defocus blur of radius `a`, whose half-aperture centroids sit
//! `8a / (3 pi)` apart, the pixels with `t >= CORE_LEVEL` lie at least
//! `0.62 a` inside the half-coverage edge; fence pixels farther than
//! `EDGE_REACH * |d| + REACH_SLACK` from such a core pixel are background
//! shaded like the fence. `d` is the local full-resolution disparity.
//!
//! Models are fitted per `TILE x TILE` tile over a window of the given
//! radius around the tile. Where the two models are closer than
//! `MIN_CONTRAST`, or either side has no pixels, the coarse decision stands.

use rayon::prelude::*;

use super::morph::dilate_bits;
use crate::image::Image;
use crate::ops::box_mean;

const TILE: usize = 8;
/// Smallest RGB distance between the models for colour to overrule geometry.
const MIN_CONTRAST: f64 = 0.1;
const ITERATIONS: usize = 6;
/// Width of the ring outside the coarse mask that samples the background.
const RING: usize = 3;
/// Level of `t` that counts as unmixed fence.
const CORE_LEVEL: f64 = 0.75;
/// Distance from the core to the half-coverage edge per pixel of disparity.
const EDGE_REACH: f64 = 0.73;
const REACH_SLACK: f64 = 1.5;
/// Half-width of the box over which ring pixels give a pixel's background.
const LOCAL: usize = 12;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum()
}

/// (fence, background) colour models of one window, if it has contrast.
fn models(inside: &[Vec<f64>], outside_mean: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    // the centroids are fitted with the plain nearest-centroid split
    let b = outside_mean;
    // start from the half of the inside pixels farthest from the background
    let mut d: Vec<f64> = inside.iter().map(|c| dist2(c, b)).collect();
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let ch = b.len();
    let mean_of = |sel: &dyn Fn(usize) -> bool| {
        let mut m = vec![0.0; ch];
        let mut n = 0.0;
        for (i, c) in inside.iter().enumerate() {
            if sel(i) {
                m.iter_mut().zip(c).for_each(|(a, v)| *a += v);
                n += 1.0;
            }
        }
        (n > 0.0).then(|| m.into_iter().map(|v| v / n).collect::<Vec<f64>>())
    };
    let mut f = mean_of(&|i| d[i] >= median)?;
    let mut near_f = Vec::new();
    for _ in 0..ITERATIONS {
        d = inside.iter().map(|c| dist2(c, &f)).collect();
        near_f = inside.iter().zip(&d).map(|(c, &df)| df < dist2(c, b)).collect();
        f = mean_of(&|i| near_f[i])?;
    }
    // the cluster still holds partly mixed edge pixels; the unmixed colour is
    // better represented by its half farther from the background
    let from_b: Vec<f64> = inside.iter().map(|c| dist2(c, b)).collect();
    let mut cluster: Vec<f64> = (0..inside.len()).filter(|&i| near_f[i]).map(|i| from_b[i]).collect();
    if !cluster.is_empty() {
        cluster.sort_by(f64::total_cmp);
        let median = cluster[cluster.len() / 2];
        f = mean_of(&|i| near_f[i] && from_b[i] >= median)?;
    }
    (dist2(&f, b).sqrt() >= MIN_CONTRAST).then(|| (f, b.to_vec()))
}

/// Position of `c` along the axis from `b` (0) to `f` (1).
fn along(c: &[f64], f: &[f64], b: &[f64]) -> f64 {
    let num: f64 = c.iter().zip(f).zip(b).map(|((c, f), b)| (c - b) * (f - b)).sum();
    num / dist2(f, b)
}

/// Two-pass chamfer distance (steps 1 and sqrt 2) to the nearest set pixel;
/// infinite when none is set.
fn chamfer_distance(bits: &[bool], w: usize, h: usize) -> Vec<f64> {
    let mut d: Vec<f64> = bits.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let diag = std::f64::consts::SQRT_2;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut v = d[i];
            if x > 0 {
                v = v.min(d[i - 1] + 1.0);
            }
            if y > 0 {
                v = v.min(d[i - w] + 1.0);
                if x > 0 {
                    v = v.min(d[i - w - 1] + diag);
                }
                if x + 1 < w {
                    v = v.min(d[i - w + 1] + diag);
                }
            }
            d[i] = v;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut v = d[i];
            if x + 1 < w {
                v = v.min(d[i + 1] + 1.0);
            }
            if y + 1 < h {
                v = v.min(d[i + w] + 1.0);
                if x + 1 < w {
                    v = v.min(d[i + w + 1] + diag);
                }
                if x > 0 {
                    v = v.min(d[i + w - 1] + diag);
                }
            }
            d[i] = v;
        }
    }
    d
}

/// Snaps the coarse mask `bits` to colour edges of `img`. `disparity`, if
/// given, is the full-resolution disparity per pixel and bounds how far a
/// fence edge may ramp.
pub(crate) fn snap_to_colour(
    bits: &[bool],
    img: &Image,
    radius: usize,
    level: f64,
    disparity: Option<&[f64]>,
) -> Vec<bool> {
    if radius == 0 {
        return bits.to_vec();
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let colour = |i: usize| (0..ch).map(|c| img.plane(c)[i] as f64).collect::<Vec<f64>>();
    let ring: Vec<bool> = dilate_bits(bits, w, h, RING).iter().zip(bits).map(|(&d, &b)| d && !b).collect();
    let ring_f: Vec<f64> = ring.iter().map(|&r| r as u8 as f64).collect();
    let ring_n = box_mean(&ring_f, w, h, 2 * LOCAL + 1);
    let local_b: Vec<Vec<f64>> = (0..ch)
        .into_par_iter()
        .map(|c| {
            let weighted: Vec<f64> = img.plane(c).iter().zip(&ring_f).map(|(&v, &r)| v as f64 * r).collect();
            box_mean(&weighted, w, h, 2 * LOCAL + 1)
        })
        .collect();
    let (tw, th) = (w.div_ceil(TILE), h.div_ceil(TILE));
    // per decided pixel: (index, fence, core)
    let tiles: Vec<Vec<(usize, bool, bool)>> = (0..tw * th)
        .into_par_iter()
        .map(|t| {
            let (x0, y0) = ((t % tw) * TILE, (t / tw) * TILE);
            let (x1, y1) = ((x0 + TILE).min(w), (y0 + TILE).min(h));
            if !(y0..y1).any(|y| bits[y * w + x0..y * w + x1].iter().any(|&b| b)) {
                return Vec::new();
            }
            let (wx0, wy0) = (x0.saturating_sub(radius), y0.saturating_sub(radius));
            let (wx1, wy1) = ((x1 + radius).min(w), (y1 + radius).min(h));
            let mut inside = Vec::new();
            let mut out_sum = vec![0.0; ch];
            let mut out_n = 0.0;
            for y in wy0..wy1 {
                for x in wx0..wx1 {
                    let i = y * w + x;
                    if bits[i] {
                        inside.push(colour(i));
                    } else if ring[i] {
                        out_sum.iter_mut().zip(colour(i)).for_each(|(a, v)| *a += v);
                        out_n += 1.0;
                    }
                }
            }
            if out_n == 0.0 || inside.is_empty() {
                return Vec::new();
            }
            let b: Vec<f64> = out_sum.into_iter().map(|v| v / out_n).collect();
            let Some((f, b)) = models(&inside, &b) else {
                return Vec::new();
            };
            let mut decisions = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = y * w + x;
                    if bits[i] {
                        // ring coverage below one pixel in the box is mostly rounding
                        let n = ring_n[i] * ((2 * LOCAL + 1) * (2 * LOCAL + 1)) as f64;
                        let bg: Vec<f64> = if n >= 1.0 { local_b.iter().map(|p| p[i] / ring_n[i]).collect() } else { b.clone() };
                        let decided = if dist2(&f, &bg).sqrt() < MIN_CONTRAST {
                            (i, true, true)
                        } else {
                            let t = along(&colour(i), &f, &bg);
                            (i, t > level, t >= CORE_LEVEL)
                        };
                        decisions.push(decided);
                    }
                }
            }
            decisions
        })
        .collect();
    let mut out = bits.to_vec();
    let mut core = bits.to_vec();
    for (i, v, c) in tiles.into_iter().flatten() {
        out[i] = v;
        core[i] = c;
    }
    if let Some(d) = disparity {
        let dist = chamfer_distance(&core, w, h);
        for (i, o) in out.iter_mut().enumerate() {
            *o = *o && dist[i] <= EDGE_REACH * d[i].abs() + REACH_SLACK;
        }
    }
    out
}
