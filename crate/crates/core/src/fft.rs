//! Thin 2D helpers over rustfft (f64 throughout).

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place 2D DFT of a row-major `h x w` complex buffer. The inverse is
/// normalized by `1/(h*w)`.
pub(crate) fn fft2_inplace(buf: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), h * w);
    let mut planner = FftPlanner::<f64>::new();
    let row = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    let col = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    row.process(buf);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    if inverse {
        let s = 1.0 / (h * w) as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

pub(crate) fn fft2_real(data: &[f32], h: usize, w: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    fft2_inplace(&mut buf, h, w, false);
    buf
}

/// Signed frequency index of DFT bin `k` for length `n`.
pub(crate) fn signed_freq(k: usize, n: usize) -> f64 {
    if 2 * k > n {
        k as f64 - n as f64
    } else {
        k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let (h, w) = (6, 10);
        let data: Vec<f32> = (0..h * w).map(|i| ((i * 37) % 11) as f32 / 10.0).collect();
        let mut spec = fft2_real(&data, h, w);
        assert!((spec[0].re - data.iter().map(|&v| v as f64).sum::<f64>()).abs() < 1e-9);
        fft2_inplace(&mut spec, h, w, true);
        for (a, b) in spec.iter().zip(&data) {
            assert!((a.re - *b as f64).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(signed_freq(0, 8), 0.0);
        assert_eq!(signed_freq(4, 8), 4.0);
        assert_eq!(signed_freq(5, 8), -3.0);
        assert_eq!(signed_freq(3, 7), 3.0);
        assert_eq!(signed_freq(4, 7), -3.0);
    }
}
