use crate::error::{Error, Result};

/// Square blur kernel of side `2*radius+1`, row-major, taps indexed by
/// offset `(x, y)` in `[-radius, radius]^2`. Taps are non-negative and sum
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfKernel {
    radius: usize,
    taps: Vec<f32>,
}

impl PsfKernel {
    pub fn new(radius: usize, taps: Vec<f32>) -> Result<Self> {
        let side = 2 * radius + 1;
        if taps.len() != side * side {
            return Err(Error::Dimensions(format!(
                "kernel of radius {radius} needs {} taps, got {}",
                side * side,
                taps.len()
            )));
        }
        if taps.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Range("kernel taps must be finite and non-negative".into()));
        }
        let sum: f64 = taps.iter().map(|&t| t as f64).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Range(format!("kernel taps sum to {sum}, expected 1")));
        }
        Ok(Self { radius, taps })
    }

    /// Normalizes arbitrary non-negative weights; an all-zero input yields
    /// the delta kernel.
    pub fn from_weights(radius: usize, weights: &[f64]) -> Self {
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Self::delta().padded(radius);
        }
        let taps = weights.iter().map(|&w| (w / sum) as f32).collect();
        Self { radius, taps }
    }

    pub fn delta() -> Self {
        Self { radius: 0, taps: vec![1.0] }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn taps(&self) -> &[f32] {
        &self.taps
    }

    /// Tap at offset `(x, y)`; zero outside the support.
    pub fn at(&self, x: i64, y: i64) -> f32 {
        let r = self.radius as i64;
        if x.abs() > r || y.abs() > r {
            return 0.0;
        }
        self.taps[((y + r) * (2 * r + 1) + (x + r)) as usize]
    }

    /// Zero-pads to a larger radius (no-op if already that large).
    pub fn padded(&self, radius: usize) -> Self {
        if radius <= self.radius {
            return self.clone();
        }
        let side = 2 * radius + 1;
        let r = radius as i64;
        let mut taps = vec![0.0; side * side];
        for y in -r..=r {
            for x in -r..=r {
                taps[((y + r) * side as i64 + (x + r)) as usize] = self.at(x, y);
            }
        }
        Self { radius, taps }
    }

    /// Horizontal mirror `k'(x, y) = k(-x, y)`.
    pub fn mirrored(&self) -> Self {
        let side = self.side();
        let mut taps = self.taps.clone();
        for row in taps.chunks_mut(side) {
            row.reverse();
        }
        Self { radius: self.radius, taps }
    }

    /// First moment `(sum x*k, sum y*k)`.
    pub fn centroid(&self) -> (f64, f64) {
        let r = self.radius as i64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for y in -r..=r {
            for x in -r..=r {
                let t = self.at(x, y) as f64;
                cx += x as f64 * t;
                cy += y as f64 * t;
            }
        }
        (cx, cy)
    }

    /// Tap-wise mean of two kernels, renormalized.
    pub fn average(a: &PsfKernel, b: &PsfKernel) -> PsfKernel {
        let r = a.radius.max(b.radius);
        let (a, b) = (a.padded(r), b.padded(r));
        let w: Vec<f64> = a.taps.iter().zip(&b.taps).map(|(&p, &q)| 0.5 * (p as f64 + q as f64)).collect();
        PsfKernel::from_weights(r, &w)
    }

    /// Spatially rescales the kernel by `alpha` with bilinear resampling and
    /// renormalizes. `alpha = 0` collapses to the delta kernel.
    pub fn scaled(&self, alpha: f64) -> Result<PsfKernel> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be >= 0, got {alpha}")));
        }
        if alpha == 0.0 {
            return Ok(PsfKernel::delta());
        }
        let radius = (self.radius as f64 * alpha - 1e-9).ceil().max(0.0) as usize;
        let r = radius as i64;
        let side = 2 * radius + 1;
        let mut w = vec![0.0f64; side * side];
        for y in -r..=r {
            for x in -r..=r {
                w[((y + r) * side as i64 + (x + r)) as usize] = self.sample(x as f64 / alpha, y as f64 / alpha);
            }
        }
        Ok(PsfKernel::from_weights(radius, &w))
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let t = |xx: i64, yy: i64| self.at(xx, yy) as f64;
        let top = t(x0, y0) * (1.0 - fx) + if fx > 0.0 { t(x0 + 1, y0) * fx } else { 0.0 };
        let bottom = if fy > 0.0 {
            t(x0, y0 + 1) * (1.0 - fx) + if fx > 0.0 { t(x0 + 1, y0 + 1) * fx } else { 0.0 }
        } else {
            0.0
        };
        top * (1.0 - fy) + bottom * fy
    }
}

/// Left, right and combined kernels of one dual-pixel blur.
#[derive(Debug, Clone, PartialEq)]
pub struct DpPsfPair {
    pub left: PsfKernel,
    pub right: PsfKernel,
    pub combined: PsfKernel,
}

/// Disc of radius `alpha` with a one-pixel linear edge, on a grid of radius
/// `ceil(alpha)`.
fn disc_weights(alpha: f64) -> (usize, Vec<f64>) {
    let radius = alpha.ceil() as usize;
    let r = radius as i64;
    let side = 2 * radius + 1;
    let mut w = Vec::with_capacity(side * side);
    for y in -r..=r {
        for x in -r..=r {
            let rho = ((x * x + y * y) as f64).sqrt();
            w.push((alpha + 0.5 - rho).clamp(0.0, 1.0));
        }
    }
    (radius, w)
}

/// Parametric dual-pixel PSFs for blur scale `alpha`.
///
/// The combined kernel is a soft-edged disc. The left kernel keeps the
/// half of the disc with `x < 0` (the `x = 0` column at half weight) and the
/// right kernel is its mirror. Each is normalized on its own, which makes the
/// combined kernel exactly their mean.
pub fn make_dp_psf_pair(alpha: f64) -> Result<DpPsfPair> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("blur scale must be >= 0, got {alpha}")));
    }
    let (radius, disc) = disc_weights(alpha);
    let side = 2 * radius + 1;
    let r = radius as i64;
    let half: Vec<f64> = disc
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let x = (i % side) as i64 - r;
            d * (0.5 - x as f64).clamp(0.0, 1.0)
        })
        .collect();
    let left = PsfKernel::from_weights(radius, &half);
    let right = left.mirrored();
    let combined = PsfKernel::average(&left, &right);
    Ok(DpPsfPair { left, right, combined })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support_radius(k: &PsfKernel, thresh: f32) -> f64 {
        let r = k.radius() as i64;
        let mut best: f64 = 0.0;
        for y in -r..=r {
            for x in -r..=r {
                if k.at(x, y) > thresh {
                    best = best.max(((x * x + y * y) as f64).sqrt());
                }
            }
        }
        best
    }

    #[test]
    fn zero_blur_is_delta() {
        let p = make_dp_psf_pair(0.0).unwrap();
        for k in [&p.left, &p.right, &p.combined] {
            assert_eq!(k, &PsfKernel::delta());
        }
    }

    #[test]
    fn right_mirrors_left_and_combined_is_mean() {
        for alpha in [0.3, 1.0, 2.5, 4.0, 7.2] {
            let p = make_dp_psf_pair(alpha).unwrap();
            let r = p.left.radius() as i64;
            for y in -r..=r {
                for x in -r..=r {
                    assert_eq!(p.right.at(x, y), p.left.at(-x, y));
                    let mean = 0.5 * (p.left.at(x, y) + p.right.at(x, y));
                    assert!((p.combined.at(x, y) - mean).abs() < 1e-7);
                }
            }
            assert_eq!(p.left.radius(), (alpha as f64).ceil() as usize);
            PsfKernel::new(p.left.radius(), p.left.taps().to_vec()).unwrap();
        }
    }

    #[test]
    fn left_centroid_negative_right_positive() {
        let p = make_dp_psf_pair(4.0).unwrap();
        assert!(p.left.centroid().0 < 0.0);
        assert!(p.right.centroid().0 > 0.0);
        assert!(p.combined.centroid().0.abs() < 1e-6);
        assert!(p.left.centroid().1.abs() < 1e-6);
    }

    #[test]
    fn scale_identity_and_collapse() {
        let p = make_dp_psf_pair(3.0).unwrap();
        let same = p.left.scaled(1.0).unwrap();
        assert_eq!(same.radius(), p.left.radius());
        for (a, b) in same.taps().iter().zip(p.left.taps()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(p.left.scaled(0.0).unwrap(), PsfKernel::delta());
        assert!(p.left.scaled(-1.0).is_err());
    }

    #[test]
    fn doubling_doubles_support() {
        let disc = make_dp_psf_pair(4.0).unwrap().combined;
        let before = support_radius(&disc, 1e-3);
        let after = support_radius(&disc.scaled(2.0).unwrap(), 1e-3);
        assert!((after - 2.0 * before).abs() <= 1.0, "{before} -> {after}");
    }

    #[test]
    fn constructor_validates() {
        assert!(PsfKernel::new(1, vec![0.0; 8]).is_err());
        assert!(PsfKernel::new(0, vec![0.5]).is_err());
        assert!(PsfKernel::new(0, vec![-1.0]).is_err());
        assert!(PsfKernel::new(0, vec![1.0]).is_ok());
    }
}
