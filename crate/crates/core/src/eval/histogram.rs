use crate::error::{Error, Result};
use crate::image::Image;

pub const HISTOGRAM_BINS: usize = 1024;

/// Piecewise-linear empirical CDF over `[0, 1]`: `edges[k]` is the
/// fraction of samples below `k / bins`.
fn cdf(values: &[f32]) -> Vec<f64> {
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &v in values {
        counts[((v.clamp(0.0, 1.0) * HISTOGRAM_BINS as f32) as usize).min(HISTOGRAM_BINS - 1)] += 1;
    }
    let n = values.len().max(1) as f64;
    let mut edges = Vec::with_capacity(HISTOGRAM_BINS + 1);
    let mut acc = 0u64;
    edges.push(0.0);
    for c in counts {
        acc += c;
        edges.push(acc as f64 / n);
    }
    edges
}

fn forward(edges: &[f64], v: f32) -> f64 {
    let x = v.clamp(0.0, 1.0) as f64 * HISTOGRAM_BINS as f64;
    let k = (x.floor() as usize).min(HISTOGRAM_BINS - 1);
    edges[k] + (x - k as f64) * (edges[k + 1] - edges[k])
}

/// Smallest value whose CDF reaches `u`, interpolating within the bin.
fn inverse(edges: &[f64], u: f64) -> f64 {
    let k = edges.partition_point(|&e| e < u).clamp(1, HISTOGRAM_BINS);
    let (lo, hi) = (edges[k - 1], edges[k]);
    let t = if hi > lo { ((u - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
    ((k - 1) as f64 + t) / HISTOGRAM_BINS as f64
}

/// Per-channel monotone remapping of `src` so its intensity distribution
/// follows `reference` (1024-bin CDFs, linear within bins).
pub fn histogram_match(src: &Image, reference: &Image) -> Result<Image> {
    if src.channels() != reference.channels() {
        return Err(Error::Channels(format!(
            "source has {} channels, reference {}",
            src.channels(),
            reference.channels()
        )));
    }
    let mut data = Vec::with_capacity(src.data().len());
    for c in 0..src.channels() {
        let (fs, fr) = (cdf(src.plane(c)), cdf(reference.plane(c)));
        data.extend(src.plane(c).iter().map(|&v| inverse(&fr, forward(&fs, v)) as f32));
    }
    Image::from_clamped(src.width(), src.height(), src.channels(), data)
}
