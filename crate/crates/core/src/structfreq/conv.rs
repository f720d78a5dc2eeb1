use rand::Rng;
use rayon::prelude::*;

use crate::dpform::reflect;
use crate::error::{Error, Result};

/// Dense `k x k` convolution (cross-correlation) with reflect padding.
/// Weights are laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Self {
        Self { c_out, c_in, k, weight: vec![0.0; c_out * c_in * k * k], bias: vec![0.0; c_out] }
    }

    /// He-uniform weights, zero bias.
    pub fn random(c_out: usize, c_in: usize, k: usize, rng: &mut impl Rng) -> Self {
        let mut c = Self::zeros(c_out, c_in, k);
        if c_in > 0 {
            let bound = (6.0 / (c_in * k * k) as f64).sqrt() as f32;
            c.weight.iter_mut().for_each(|w| *w = rng.gen_range(-bound..=bound));
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.k % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel size must be odd, got {}", self.k)));
        }
        if self.weight.len() != self.c_out * self.c_in * self.k * self.k || self.bias.len() != self.c_out {
            return Err(Error::Dimensions("convolution weight shape mismatch".into()));
        }
        if self.weight.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Range("convolution weights must be finite".into()));
        }
        Ok(())
    }

    fn tap(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.weight[((o * self.c_in + i) * self.k + ky) * self.k + kx]
    }

    /// Output planes (f64) for input planes of size `h x w`, bias included.
    pub(crate) fn apply(&self, input: &[&[f32]], h: usize, w: usize) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        if input.len() != self.c_in {
            return Err(Error::Channels(format!("convolution expects {} inputs, got {}", self.c_in, input.len())));
        }
        let r = (self.k / 2) as i64;
        let xs: Vec<Vec<usize>> = (-r..=r).map(|d| (0..w as i64).map(|x| reflect(x + d, w)).collect()).collect();
        let ys: Vec<Vec<usize>> = (-r..=r).map(|d| (0..h as i64).map(|y| reflect(y + d, h)).collect()).collect();
        Ok((0..self.c_out)
            .into_par_iter()
            .map(|o| {
                let mut acc = vec![self.bias[o] as f64; h * w];
                for (i, plane) in input.iter().enumerate() {
                    for ky in 0..self.k {
                        for kx in 0..self.k {
                            let t = self.tap(o, i, ky, kx) as f64;
                            if t == 0.0 {
                                continue;
                            }
                            for y in 0..h {
                                let src = &plane[ys[ky][y] * w..];
                                let dst = &mut acc[y * w..(y + 1) * w];
                                for (x, d) in dst.iter_mut().enumerate() {
                                    *d += t * src[xs[kx][x]] as f64;
                                }
                            }
                        }
                    }
                }
                acc
            })
            .collect())
    }
}
