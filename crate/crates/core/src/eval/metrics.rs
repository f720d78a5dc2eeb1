use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, MaskImage};

/// PSNR reported for identical inputs.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Pixel-level segmentation scores. A precision or recall whose
/// denominator is zero is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No pixel was predicted as fence.
    pub precision_undefined: bool,
    /// The ground truth has no fence pixel.
    pub recall_undefined: bool,
}

pub fn precision_recall_f1(pred: &MaskImage, gt: &MaskImage) -> Result<SegMetrics> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::Dimensions(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if !pred.is_binary() || !gt.is_binary() {
        return Err(Error::InvalidArgument("segmentation metrics need binary masks".into()));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p == 1.0, g == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(SegMetrics {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        precision_undefined: tp + fp == 0,
        recall_undefined: tp + fn_ == 0,
    })
}

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Dimensions(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

fn psnr_from(sum_sq: f64, n: f64, peak: f64) -> f64 {
    if sum_sq == 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / (sum_sq / n)).log10()).min(PSNR_CAP_DB)
}

/// `10 log10(peak^2 / MSE)` with one MSE over all channels jointly,
/// accumulated in f64; identical inputs give 99 dB.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(psnr_from(sum, a.data().len() as f64, peak))
}

/// PSNR restricted to the pixels set in `mask` (all channels); `None` when
/// the mask is empty.
pub fn masked_psnr(a: &Image, b: &Image, mask: &MaskImage, peak: f64) -> Result<Option<f64>> {
    check_pair(a, b)?;
    if (mask.width(), mask.height()) != (a.width(), a.height()) {
        return Err(Error::Dimensions("mask does not match the images".into()));
    }
    let bits = mask.bits();
    let n = bits.iter().filter(|&&b| b).count();
    if n == 0 {
        return Ok(None);
    }
    let mut sum = 0.0;
    for c in 0..a.channels() {
        for ((&x, &y), &m) in a.plane(c).iter().zip(b.plane(c)).zip(&bits) {
            if m {
                sum += (x as f64 - y as f64).powi(2);
            }
        }
    }
    Ok(Some(psnr_from(sum, (n * a.channels()) as f64, peak)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> MaskImage {
        let bits: Vec<bool> = (0..w * h).map(|i| f(i % w, i / w)).collect();
        MaskImage::from_bools(w, h, &bits).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let gt = mask(8, 8, |x, y| x > y);
        let m = precision_recall_f1(&gt, &gt).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_of_the_ground_truth() {
        let gt = mask(8, 8, |x, _| x < 4);
        let pred = mask(8, 8, |x, _| x < 2);
        let m = precision_recall_f1(&pred, &gt).unwrap();
        assert_eq!((m.precision, m.recall), (1.0, 0.5));
        assert_eq!(m.f1, 2.0 / 3.0);
    }

    #[test]
    fn empty_prediction_is_flagged() {
        let gt = mask(4, 4, |x, _| x == 0);
        let m = precision_recall_f1(&MaskImage::zeros(4, 4), &gt).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.precision_undefined && !m.recall_undefined);
    }

    #[test]
    fn rejects_soft_or_mismatched_masks() {
        assert!(precision_recall_f1(&MaskImage::zeros(4, 4), &MaskImage::zeros(4, 5)).is_err());
        let soft = MaskImage::new(2, 1, vec![0.2, 1.0]).unwrap();
        assert!(precision_recall_f1(&soft, &MaskImage::zeros(2, 1)).is_err());
    }

    #[test]
    fn psnr_closed_form_and_cap() {
        let a = Image::filled(16, 12, 3, 0.3).unwrap();
        let b = Image::filled(16, 12, 3, 0.4).unwrap();
        // f32 storage: the difference is 0.1 to single precision
        let d = 0.4f32 as f64 - 0.3f32 as f64;
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), 10.0 * (1.0 / (d * d)).log10());
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-6);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
        assert!(psnr(&a, &Image::filled(16, 12, 1, 0.3).unwrap(), 1.0).is_err());
    }

    #[test]
    fn masked_psnr_only_sees_the_mask() {
        let a = Image::filled(8, 8, 3, 0.5).unwrap();
        let b = Image::from_fn(8, 8, 3, |_, x, _| if x < 4 { 0.5 } else { 0.0 }).unwrap();
        let left = mask(8, 8, |x, _| x < 4);
        assert_eq!(masked_psnr(&a, &b, &left, 1.0).unwrap(), Some(PSNR_CAP_DB));
        assert_eq!(masked_psnr(&a, &b, &MaskImage::zeros(8, 8), 1.0).unwrap(), None);
        let right = mask(8, 8, |x, _| x >= 4);
        assert!((masked_psnr(&a, &b, &right, 1.0).unwrap().unwrap() - 10.0 * 4f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreases_with_noise() {
        use rand::{Rng, SeedableRng};
        let base = Image::from_fn(32, 32, 3, |c, x, y| 0.3 + 0.01 * ((c + x + y) % 20) as f32).unwrap();
        let noise: Vec<f32> = {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            (0..base.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let scores: Vec<f64> = [0.01f32, 0.02, 0.05, 0.1, 0.2]
            .iter()
            .map(|&amp| {
                let data = base.data().iter().zip(&noise).map(|(v, n)| v + amp * n).collect();
                psnr(&base, &Image::from_clamped(32, 32, 3, data).unwrap(), 1.0).unwrap()
            })
            .collect();
        assert!(scores.windows(2).all(|p| p[0] > p[1]), "{scores:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn f1_is_the_harmonic_mean(a in prop::collection::vec(any::<bool>(), 36), b in prop::collection::vec(any::<bool>(), 36)) {
            let m = precision_recall_f1(&MaskImage::from_bools(6, 6, &a).unwrap(), &MaskImage::from_bools(6, 6, &b).unwrap()).unwrap();
            if m.precision + m.recall > 0.0 {
                prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-15);
            }
            prop_assert_eq!(m.tp + m.fp + m.fn_ <= 36, true);
        }

        #[test]
        fn psnr_is_symmetric(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Image::from_fn(9, 7, 3, |_, _, _| rng.gen()).unwrap();
            let b = Image::from_fn(9, 7, 3, |_, _, _| rng.gen()).unwrap();
            prop_assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        }
    }
}
