use rand::Rng;

use super::tensor::FeatureTensor;
use crate::error::{Error, Result};

/// 1x1 channel mixing from disparity features to structural features.
#[derive(Debug, Clone, PartialEq)]
pub struct SamWeights {
    /// Structural (gated) channels.
    pub c_out: usize,
    /// Disparity channels.
    pub c_in: usize,
    /// `[out][in]`.
    pub w: Vec<f32>,
    pub b: Vec<f32>,
}

impl SamWeights {
    pub fn zeros(c_out: usize, c_in: usize) -> Self {
        Self { c_out, c_in, w: vec![0.0; c_out * c_in], b: vec![0.0; c_out] }
    }

    pub fn random(c_out: usize, c_in: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / c_in.max(1) as f64).sqrt() as f32;
        Self {
            c_out,
            c_in,
            w: (0..c_out * c_in).map(|_| rng.gen_range(-bound..=bound)).collect(),
            b: (0..c_out).map(|_| rng.gen_range(-0.5..=0.5)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.len() != self.c_out * self.c_in || self.b.len() != self.c_out {
            return Err(Error::Dimensions("attention weight shape mismatch".into()));
        }
        if self.w.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::Range("attention weights must be finite".into()));
        }
        Ok(())
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Structural attention: `F' = F ⊙ sigmoid(W F_disp + b)`, one gate per pixel
/// and per structural channel. The gate lies in `(0, 1)`, so `|F'| <= |F|`.
pub fn sam_fuse(f_ffc: &FeatureTensor, f_disp: &FeatureTensor, w: &SamWeights) -> Result<FeatureTensor> {
    w.validate()?;
    if !f_ffc.same_spatial(f_disp) {
        return Err(Error::Dimensions(format!(
            "structural {}x{} and disparity {}x{} features differ",
            f_ffc.height(),
            f_ffc.width(),
            f_disp.height(),
            f_disp.width()
        )));
    }
    if (w.c_out, w.c_in) != (f_ffc.channels(), f_disp.channels()) {
        return Err(Error::Channels("attention weights do not match the feature channels".into()));
    }
    let n = f_ffc.height() * f_ffc.width();
    let mut out = Vec::with_capacity(f_ffc.data().len());
    for o in 0..w.c_out {
        let f = f_ffc.plane(o);
        for p in 0..n {
            let z = w.b[o] as f64
                + (0..w.c_in).map(|i| w.w[o * w.c_in + i] as f64 * f_disp.plane(i)[p] as f64).sum::<f64>();
            out.push((f[p] as f64 * sigmoid(z)) as f32);
        }
    }
    FeatureTensor::new(f_ffc.channels(), f_ffc.height(), f_ffc.width(), f_ffc.split(), out)
}
