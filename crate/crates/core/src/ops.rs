//! Small planar f64 helpers shared by the analysis modules.

use crate::dpform::reflect;

/// Separable box mean of odd width `window` with symmetric reflection.
pub(crate) fn box_mean(plane: &[f64], w: usize, h: usize, window: usize) -> Vec<f64> {
    debug_assert!(window % 2 == 1);
    let r = (window / 2) as i64;
    let inv = 1.0 / window as f64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut s = 0.0;
            for k in -r..=r {
                s += row[reflect(x as i64 + k, w)];
            }
            tmp[y * w + x] = s * inv;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for k in -r..=r {
            let sy = reflect(y as i64 + k, h);
            let src = &tmp[sy * w..(sy + 1) * w];
            for (o, s) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                *o += s;
            }
        }
        out[y * w..(y + 1) * w].iter_mut().for_each(|v| *v *= inv);
    }
    out
}

/// 2x2 average pooling; odd trailing rows/columns are reflect-padded
/// (i.e. duplicated), so the output is `ceil(w/2) x ceil(h/2)`.
pub(crate) fn pool2(plane: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        let (y0, y1) = (2 * y, (2 * y + 1).min(h - 1));
        for x in 0..ow {
            let (x0, x1) = (2 * x, (2 * x + 1).min(w - 1));
            out.push(0.25 * (plane[y0 * w + x0] + plane[y0 * w + x1] + plane[y1 * w + x0] + plane[y1 * w + x1]));
        }
    }
    (out, ow, oh)
}

/// Nearest-neighbour upsampling by an integer factor, cropped to `w x h`.
pub(crate) fn upsample_nearest<T: Copy>(plane: &[T], pw: usize, factor: usize, w: usize, h: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &plane[(y / factor) * pw..];
        out.extend((0..w).map(|x| row[x / factor]));
    }
    out
}
