use rand::Rng;

use super::conv::Conv2d;
use super::spectral::{spectral_transform, SpectralWeights};
use super::tensor::FeatureTensor;
use crate::error::{Error, Result};

/// Weights of one FFC block. Global channels come first in both the input
/// and the output tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FfcWeights {
    pub c_in: usize,
    pub global_in: usize,
    pub c_out: usize,
    pub global_out: usize,
    /// local -> local, 3x3.
    pub l2l: Conv2d,
    /// global -> local, 3x3.
    pub g2l: Conv2d,
    /// local -> global, 1x1.
    pub l2g: Conv2d,
    /// global -> global, spectral.
    pub g2g: SpectralWeights,
}

impl FfcWeights {
    pub fn zeros(c_in: usize, global_in: usize, c_out: usize, global_out: usize) -> Self {
        let (li, lo) = (c_in - global_in, c_out - global_out);
        Self {
            c_in,
            global_in,
            c_out,
            global_out,
            l2l: Conv2d::zeros(lo, li, 3),
            g2l: Conv2d::zeros(lo, global_in, 3),
            l2g: Conv2d::zeros(global_out, li, 1),
            g2g: SpectralWeights::zeros(global_out, global_in, 1, 1),
        }
    }

    pub fn random(c_in: usize, global_in: usize, c_out: usize, global_out: usize, rng: &mut impl Rng) -> Self {
        let (li, lo) = (c_in - global_in, c_out - global_out);
        Self {
            c_in,
            global_in,
            c_out,
            global_out,
            l2l: Conv2d::random(lo, li, 3, rng),
            g2l: Conv2d::random(lo, global_in, 3, rng),
            l2g: Conv2d::random(global_out, li, 1, rng),
            g2g: SpectralWeights::random(global_out, global_in, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.global_in > self.c_in || self.global_out > self.c_out {
            return Err(Error::InvalidArgument("global channel count exceeds channel count".into()));
        }
        let (li, lo) = (self.c_in - self.global_in, self.c_out - self.global_out);
        let shapes = [
            (&self.l2l, lo, li, 3),
            (&self.g2l, lo, self.global_in, 3),
            (&self.l2g, self.global_out, li, 1),
        ];
        for (c, o, i, k) in shapes {
            c.validate()?;
            if (c.c_out, c.c_in, c.k) != (o, i, k) {
                return Err(Error::Dimensions("FFC path shape inconsistent with the channel split".into()));
            }
        }
        self.g2g.validate()?;
        if (self.g2g.c_out, self.g2g.c_in) != (self.global_out, self.global_in) {
            return Err(Error::Dimensions("spectral path shape inconsistent with the channel split".into()));
        }
        Ok(())
    }
}

/// One FFC block: local->local and global->local 3x3 convolutions,
/// local->global 1x1 convolution and the global->global spectral transform,
/// summed per destination stream and passed through ReLU.
pub fn ffc_block(x: &FeatureTensor, w: &FfcWeights) -> Result<FeatureTensor> {
    w.validate()?;
    if (x.channels(), x.split()) != (w.c_in, w.global_in) {
        return Err(Error::InvalidArgument(format!(
            "block expects {} channels ({} global), got {} ({} global)",
            w.c_in,
            w.global_in,
            x.channels(),
            x.split()
        )));
    }
    let (h, wd) = (x.height(), x.width());
    let g = x.global();
    let l = x.local();
    let planes = |t: &FeatureTensor| (0..t.channels()).map(|c| t.plane(c).to_vec()).collect::<Vec<_>>();
    let (gp, lp) = (planes(&g), planes(&l));
    let gref: Vec<&[f32]> = gp.iter().map(|p| p.as_slice()).collect();
    let lref: Vec<&[f32]> = lp.iter().map(|p| p.as_slice()).collect();

    let mut local = w.l2l.apply(&lref, h, wd)?;
    for (acc, add) in local.iter_mut().zip(w.g2l.apply(&gref, h, wd)?) {
        acc.iter_mut().zip(add).for_each(|(a, b)| *a += b);
    }
    let mut global = w.l2g.apply(&lref, h, wd)?;
    if w.global_in > 0 {
        let spec = spectral_transform(&g, &w.g2g)?;
        for (o, acc) in global.iter_mut().enumerate() {
            acc.iter_mut().zip(spec.plane(o)).for_each(|(a, &b)| *a += b as f64);
        }
    } else {
        // no spectral input: the path contributes its bias only
        for (acc, &b) in global.iter_mut().zip(&w.g2g.bias) {
            acc.iter_mut().for_each(|a| *a += b as f64);
        }
    }
    let relu = |p: Vec<f64>| p.into_iter().map(|v| v.max(0.0) as f32).collect::<Vec<f32>>();
    let out: Vec<Vec<f32>> = global.into_iter().chain(local).map(relu).collect();
    FeatureTensor::from_planes(out, h, wd, w.global_out)
}
