//! Spatially varying (patch-wise) convolution.
//!
//! The image is split into `rows x cols` cells; each cell is convolved with
//! its own kernel. Across every cell seam the two neighbouring results are
//! cross-faded linearly over a band one kernel radius wide, so the per-pixel
//! weights form a partition of unity and constants are preserved exactly.
//!
//! Borders are periodic. Circular extension is the one standard rule under
//! which every kernel, including the half-aperture ones that move mass
//! sideways, keeps the total brightness unchanged while each output stays a
//! convex combination of inputs; reflection loses brightness for asymmetric
//! kernels, and mixing rules per kernel part overshoots `[0, 1]` at borders.
//! Being linear in the kernel with one shared rule, it also keeps
//! `k_C = (k_L + k_R) / 2` exact in the images, and it matches the circular
//! shifts used by the cost volume.

use rayon::prelude::*;

use super::grid::PsfGrid;
use super::psf::PsfKernel;
use crate::error::{Error, Result};
use crate::image::{Image, MaskImage};

/// Symmetric reflection `... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...`.
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

#[inline]
fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Cell boundaries `0 = b_0 < b_1 < ... < b_cells = len`.
fn edges(len: usize, cells: usize) -> Vec<usize> {
    (0..=cells).map(|j| j * len / cells).collect()
}

/// Feathering weight of a cell spanning `[lo, hi)` at pixel `x`, with
/// seams at `lo - 0.5` / `hi - 0.5` and a ramp of total width `band`.
fn cell_weight(x: usize, lo: usize, hi: usize, first: bool, last: bool, band: f64) -> f64 {
    let x = x as f64;
    if band == 0.0 {
        return if x >= lo as f64 && x < hi as f64 { 1.0 } else { 0.0 };
    }
    let left = if first { 1.0 } else { ((x - (lo as f64 - 0.5)) / band + 0.5).clamp(0.0, 1.0) };
    let right = if last { 1.0 } else { (((hi as f64 - 0.5) - x) / band + 0.5).clamp(0.0, 1.0) };
    left * right
}

/// Pads a plane by `pad` on every side with its periodic extension.
fn pad_plane(plane: &[f32], w: usize, h: usize, pad: usize) -> (Vec<f32>, usize) {
    let pw = w + 2 * pad;
    let ph = h + 2 * pad;
    let mut out = vec![0.0f32; pw * ph];
    for py in 0..ph {
        let sy = wrap(py as i64 - pad as i64, h);
        let row = &plane[sy * w..(sy + 1) * w];
        let dst = &mut out[py * pw..(py + 1) * pw];
        for (px, d) in dst.iter_mut().enumerate() {
            *d = row[wrap(px as i64 - pad as i64, w)];
        }
    }
    (out, pw)
}

/// Convolution of the padded plane with `k` over the output window
/// `[x0, x1) x [y0, y1)`, scaled by the per-pixel weights `wx * wy`, added
/// into `acc` (window-local, row-major).
#[allow(clippy::too_many_arguments)]
fn convolve_window(
    padded: &[f32],
    pw: usize,
    pad: usize,
    k: &PsfKernel,
    (x0, x1): (usize, usize),
    (y0, y1): (usize, usize),
    wx: &[f64],
    wy: &[f64],
    acc: &mut [f64],
) {
    let ww = x1 - x0;
    let r = k.radius() as i64;
    let mut row_acc = vec![0.0f64; ww];
    for (iy, y) in (y0..y1).enumerate() {
        if wy[iy] == 0.0 {
            continue;
        }
        row_acc.iter_mut().for_each(|v| *v = 0.0);
        for v in -r..=r {
            let src_y = (y as i64 - v + pad as i64) as usize;
            let src_row = &padded[src_y * pw..(src_y + 1) * pw];
            for u in -r..=r {
                let t = k.at(u, v) as f64;
                if t == 0.0 {
                    continue;
                }
                let start = (x0 as i64 - u + pad as i64) as usize;
                for (a, &s) in row_acc.iter_mut().zip(&src_row[start..start + ww]) {
                    *a += t * s as f64;
                }
            }
        }
        let dst = &mut acc[iy * ww..(iy + 1) * ww];
        for ((d, &a), &wxv) in dst.iter_mut().zip(&row_acc).zip(wx) {
            *d += a * wxv * wy[iy];
        }
    }
}

/// Patch-wise convolution of a single plane; returns f64 results.
pub(crate) fn patchwise_plane(plane: &[f32], w: usize, h: usize, grid: &PsfGrid) -> Result<Vec<f64>> {
    let shape = grid.shape();
    if shape.cols > w || shape.rows > h {
        return Err(Error::Dimensions(format!(
            "{}x{} grid does not fit a {w}x{h} image",
            shape.rows, shape.cols
        )));
    }
    let radius = grid.radius();
    let xs = edges(w, shape.cols);
    let ys = edges(h, shape.rows);
    let min_cell = xs.windows(2).chain(ys.windows(2)).map(|e| e[1] - e[0]).min().unwrap_or(0);
    if radius > min_cell {
        return Err(Error::InvalidArgument(format!(
            "kernel radius {radius} exceeds the smallest patch size {min_cell}"
        )));
    }
    let band = radius as f64;
    let reach = (radius + 1) / 2 + 1;
    let (padded, pw) = pad_plane(plane, w, h, radius);

    let cells: Vec<(usize, usize)> =
        (0..shape.rows).flat_map(|r| (0..shape.cols).map(move |c| (r, c))).collect();
    // Each cell's contribution is computed independently, then summed in a
    // fixed cell order so the result does not depend on the thread count.
    let parts: Vec<((usize, usize), (usize, usize), Vec<f64>)> = cells
        .par_iter()
        .map(|&(row, col)| {
            let x0 = xs[col].saturating_sub(reach);
            let x1 = (xs[col + 1] + reach).min(w);
            let y0 = ys[row].saturating_sub(reach);
            let y1 = (ys[row + 1] + reach).min(h);
            let (fc, lc) = (col == 0, col + 1 == shape.cols);
            let (fr, lr) = (row == 0, row + 1 == shape.rows);
            let wx: Vec<f64> = (x0..x1).map(|x| cell_weight(x, xs[col], xs[col + 1], fc, lc, band)).collect();
            let wy: Vec<f64> = (y0..y1).map(|y| cell_weight(y, ys[row], ys[row + 1], fr, lr, band)).collect();
            let mut acc = vec![0.0f64; (x1 - x0) * (y1 - y0)];
            convolve_window(&padded, pw, radius, grid.kernel(row, col), (x0, x1), (y0, y1), &wx, &wy, &mut acc);
            ((x0, x1), (y0, y1), acc)
        })
        .collect();

    let mut out = vec![0.0f64; w * h];
    for ((x0, x1), (y0, y1), acc) in parts {
        let ww = x1 - x0;
        for (iy, y) in (y0..y1).enumerate() {
            let dst = &mut out[y * w + x0..y * w + x1];
            for (d, a) in dst.iter_mut().zip(&acc[iy * ww..(iy + 1) * ww]) {
                *d += a;
            }
        }
    }
    Ok(out)
}

/// Blends one scalar per cell with the same seam weights the patch-wise
/// convolution uses, giving the per-pixel value of a kernel-linear quantity
/// (such as a centroid) of the effective kernel.
pub(crate) fn blend_cells(grid: &PsfGrid, w: usize, h: usize, values: &[f64]) -> Vec<f64> {
    let shape = grid.shape();
    let band = grid.radius() as f64;
    let xs = edges(w, shape.cols);
    let ys = edges(h, shape.rows);
    let mut out = vec![0.0; w * h];
    for row in 0..shape.rows {
        let (fr, lr) = (row == 0, row + 1 == shape.rows);
        let wy: Vec<f64> = (0..h).map(|y| cell_weight(y, ys[row], ys[row + 1], fr, lr, band)).collect();
        for col in 0..shape.cols {
            let (fc, lc) = (col == 0, col + 1 == shape.cols);
            let v = values[row * shape.cols + col];
            for x in 0..w {
                let wx = cell_weight(x, xs[col], xs[col + 1], fc, lc, band);
                if wx == 0.0 {
                    continue;
                }
                for y in 0..h {
                    out[y * w + x] += v * wx * wy[y];
                }
            }
        }
    }
    out
}

/// Convolves every channel of `img` with the spatially varying `grid`.
pub fn patchwise_conv(img: &Image, grid: &PsfGrid) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(img.data().len());
    for c in 0..img.channels() {
        data.extend(patchwise_plane(img.plane(c), w, h, grid)?.into_iter().map(|v| v as f32));
    }
    Image::from_clamped(w, h, img.channels(), data)
}

/// Patch-wise convolution of a mask; the result is a soft mask.
pub fn patchwise_conv_mask(mask: &MaskImage, grid: &PsfGrid) -> Result<MaskImage> {
    MaskImage::from_image(&patchwise_conv(&mask.to_image(), grid)?)
}
