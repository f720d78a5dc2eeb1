//! Binary morphology with disc structuring elements. Pixels outside the
//! image never count as set, and never block an erosion.

use crate::error::Result;
use crate::image::MaskImage;

/// Half-widths of the disc `x^2 + y^2 <= r^2`, indexed by `dy + r`.
fn disc_rows(r: usize) -> Vec<usize> {
    let r = r as i64;
    (-r..=r).map(|dy| ((r * r - dy * dy) as f64).sqrt().floor() as usize).collect()
}

/// Dilation of a boolean raster.
pub(crate) fn dilate_bits(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return bits.to_vec();
    }
    // prefix counts per row make every horizontal run test O(1)
    let mut prefix = vec![0u32; (w + 1) * h];
    for y in 0..h {
        for x in 0..w {
            prefix[y * (w + 1) + x + 1] = prefix[y * (w + 1) + x] + bits[y * w + x] as u32;
        }
    }
    let rows = disc_rows(r);
    let ri = r as i64;
    let mut out = vec![false; w * h];
    for y in 0..h {
        for (k, &half) in rows.iter().enumerate() {
            let sy = y as i64 + k as i64 - ri;
            if sy < 0 || sy >= h as i64 {
                continue;
            }
            let p = &prefix[sy as usize * (w + 1)..(sy as usize + 1) * (w + 1)];
            for x in 0..w {
                if out[y * w + x] {
                    continue;
                }
                let lo = x.saturating_sub(half);
                let hi = (x + half + 1).min(w);
                if p[hi] > p[lo] {
                    out[y * w + x] = true;
                }
            }
        }
    }
    out
}

pub(crate) fn erode_bits(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let inv: Vec<bool> = bits.iter().map(|b| !b).collect();
    dilate_bits(&inv, w, h, r).into_iter().map(|b| !b).collect()
}

/// Closing (fills gaps narrower than the disc) then opening (removes specks).
pub(crate) fn close_open(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let closed = erode_bits(&dilate_bits(bits, w, h, r), w, h, r);
    dilate_bits(&erode_bits(&closed, w, h, r), w, h, r)
}

/// Morphological dilation of a mask (set = value >= 0.5) with a disc of
/// radius `r`.
pub fn dilate_mask(mask: &MaskImage, r: usize) -> Result<MaskImage> {
    let (w, h) = (mask.width(), mask.height());
    MaskImage::from_bools(w, h, &dilate_bits(&mask.bits(), w, h, r))
}
