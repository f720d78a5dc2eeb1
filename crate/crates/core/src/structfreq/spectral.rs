use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::tensor::FeatureTensor;
use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, fft2_real};

/// Per-frequency channel mixing on stacked (real, imag) spectra.
///
/// For every half-spectrum bin `f` (rows `0..H`, columns `0..=W/2`) and every
/// (out, in) pair there is a 2x2 block `[a, b, c, d]` mapping `(re, im)` of
/// the input to `(a re + b im, c re + d im)` of the output. A `1 x 1` frequency
/// grid shares one set of blocks across all bins (the classic FFC layer);
/// otherwise the grid must match the input's half spectrum exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    pub c_out: usize,
    pub c_in: usize,
    pub freq_h: usize,
    pub freq_w: usize,
    /// `[fy][fx][out][in][4]`.
    pub blocks: Vec<f32>,
    /// Added to each output channel in the spatial domain.
    pub bias: Vec<f32>,
}

impl SpectralWeights {
    pub fn zeros(c_out: usize, c_in: usize, freq_h: usize, freq_w: usize) -> Self {
        Self { c_out, c_in, freq_h, freq_w, blocks: vec![0.0; freq_h * freq_w * c_out * c_in * 4], bias: vec![0.0; c_out] }
    }

    /// Shared identity mixing for `c` channels.
    pub fn identity(c: usize) -> Self {
        let mut w = Self::zeros(c, c, 1, 1);
        for i in 0..c {
            let b = (i * c + i) * 4;
            w.blocks[b] = 1.0;
            w.blocks[b + 3] = 1.0;
        }
        w
    }

    /// Shared He-uniform blocks, zero bias.
    pub fn random(c_out: usize, c_in: usize, rng: &mut impl Rng) -> Self {
        let mut w = Self::zeros(c_out, c_in, 1, 1);
        if c_in > 0 {
            let bound = (6.0 / (2 * c_in) as f64).sqrt() as f32;
            w.blocks.iter_mut().for_each(|v| *v = rng.gen_range(-bound..=bound));
        }
        w
    }

    /// Per-frequency multiplication of each channel by its own spectrum
    /// (`spectra[c]` holds the `h x (w/2 + 1)` half spectrum for channel `c`).
    pub fn diagonal(spectra: &[Vec<Complex64>], h: usize, w: usize) -> Result<Self> {
        let (fh, fw) = (h, w / 2 + 1);
        let c = spectra.len();
        if spectra.iter().any(|s| s.len() != fh * fw) {
            return Err(Error::Dimensions("spectrum size does not match the half-spectrum grid".into()));
        }
        let mut out = Self::zeros(c, c, fh, fw);
        for f in 0..fh * fw {
            for (i, s) in spectra.iter().enumerate() {
                let b = ((f * c + i) * c + i) * 4;
                let (re, im) = (s[f].re as f32, s[f].im as f32);
                out.blocks[b..b + 4].copy_from_slice(&[re, -im, im, re]);
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.len() != self.freq_h * self.freq_w * self.c_out * self.c_in * 4 || self.bias.len() != self.c_out
        {
            return Err(Error::Dimensions("spectral weight shape mismatch".into()));
        }
        if self.blocks.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Range("spectral weights must be finite".into()));
        }
        Ok(())
    }

    fn block(&self, f: usize, o: usize, i: usize) -> &[f32] {
        let f = if self.freq_h * self.freq_w == 1 { 0 } else { f };
        let b = ((f * self.c_out + o) * self.c_in + i) * 4;
        &self.blocks[b..b + 4]
    }
}

/// FFT over the spatial dims, per-frequency mixing of the stacked
/// (real, imag) channels, inverse FFT; the real part plus bias is returned.
///
/// Only the half spectrum is mixed. The other half is rebuilt by Hermitian
/// symmetry, so for real input the result is real even when the weights are
/// arbitrary.
pub fn spectral_transform(x: &FeatureTensor, w: &SpectralWeights) -> Result<FeatureTensor> {
    w.validate()?;
    if x.split() != x.channels() {
        return Err(Error::InvalidArgument("spectral transform needs an all-global tensor".into()));
    }
    if x.channels() != w.c_in {
        return Err(Error::Channels(format!("spectral weights expect {} channels, got {}", w.c_in, x.channels())));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Range("spectral transform input must be finite".into()));
    }
    let (h, wd) = (x.height(), x.width());
    let hw = wd / 2 + 1;
    let shared = w.freq_h * w.freq_w == 1;
    if !shared && (w.freq_h, w.freq_w) != (h, hw) {
        return Err(Error::Dimensions(format!(
            "frequency grid {}x{} does not match {}x{}",
            w.freq_h, w.freq_w, h, hw
        )));
    }
    let spectra: Vec<Vec<Complex64>> = (0..x.channels()).into_par_iter().map(|c| fft2_real(x.plane(c), h, wd)).collect();
    let planes: Vec<Vec<f32>> = (0..w.c_out)
        .into_par_iter()
        .map(|o| {
            let mut full = vec![Complex64::new(0.0, 0.0); h * wd];
            for ky in 0..h {
                for kx in 0..hw {
                    let f = ky * hw + kx;
                    let (mut re, mut im) = (0.0, 0.0);
                    for (i, s) in spectra.iter().enumerate() {
                        let b = w.block(f, o, i);
                        let v = s[ky * wd + kx];
                        re += b[0] as f64 * v.re + b[1] as f64 * v.im;
                        im += b[2] as f64 * v.re + b[3] as f64 * v.im;
                    }
                    full[ky * wd + kx] = Complex64::new(re, im);
                }
            }
            for ky in 0..h {
                for kx in hw..wd {
                    full[ky * wd + kx] = full[((h - ky) % h) * wd + (wd - kx)].conj();
                }
            }
            fft2_inplace(&mut full, h, wd, true);
            let bias = w.bias[o] as f64;
            full.iter().map(|v| (v.re + bias) as f32).collect()
        })
        .collect();
    FeatureTensor::from_planes(planes, h, wd, w.c_out)
}
