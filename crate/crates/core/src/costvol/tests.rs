use super::*;
use crate::image::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_features(c: usize, w: usize, h: usize, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::new(c, w, h, (0..c * w * h).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Smooth random texture: bilinear upsampling of coarse noise.
fn smooth_image(w: usize, h: usize, cell: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gw = w / cell + 2;
    let lat: Vec<f32> = (0..gw * (h / cell + 2)).map(|_| rng.gen()).collect();
    Image::from_fn(w, h, 1, |_, x, y| {
        let (fx, fy) = ((x % cell) as f32 / cell as f32, (y % cell) as f32 / cell as f32);
        let (i, j) = (x / cell, y / cell);
        let t = lat[j * gw + i] * (1.0 - fx) + lat[j * gw + i + 1] * fx;
        let b = lat[(j + 1) * gw + i] * (1.0 - fx) + lat[(j + 1) * gw + i + 1] * fx;
        0.1 + 0.8 * (t * (1.0 - fy) + b * fy)
    })
    .unwrap()
}

/// Circular shift of every row: `out(x) = in(x - s)`.
fn roll(f: &FeatureMap, s: i64) -> FeatureMap {
    let w = f.width;
    let mut data = vec![0.0; f.data.len()];
    for (dst, src) in data.chunks_mut(w).zip(f.data.chunks(w)) {
        for x in 0..w {
            dst[x] = src[(x as i64 - s).rem_euclid(w as i64) as usize];
        }
    }
    FeatureMap::new(f.channels, w, f.height, data).unwrap()
}

/// Naive DFT-based fractional shift of one row, written from the definition.
fn naive_shift_row(row: &[f32], d: f64) -> Vec<f64> {
    let n = row.len();
    let nf = n as f64;
    let coeffs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            row.iter().enumerate().fold((0.0, 0.0), |(re, im), (x, &v)| {
                let a = -2.0 * PI * (k * x) as f64 / nf;
                (re + v as f64 * a.cos(), im + v as f64 * a.sin())
            })
        })
        .collect();
    (0..n)
        .map(|x| {
            let mut s = 0.0;
            for (k, &(re, im)) in coeffs.iter().enumerate() {
                let kk = if 2 * k > n { k as f64 - nf } else { k as f64 };
                if 2 * k == n {
                    s += re * (PI * d).cos() * (PI * x as f64).cos();
                    continue;
                }
                let a = 2.0 * PI * kk * (x as f64 - d) / nf;
                s += re * a.cos() - im * a.sin();
            }
            s / nf
        })
        .collect()
}

#[test]
fn zero_shift_is_identity() {
    let f = random_features(3, 32, 8, 1);
    let g = phase_shift(&f, 0.0).unwrap();
    assert!(f.data.iter().zip(&g.data).all(|(a, b)| (a - b).abs() <= 1e-6));
}

#[test]
fn integer_shift_is_circular_roll() {
    let f = random_features(2, 40, 6, 2);
    for s in [-5i64, -1, 1, 2, 7, 20] {
        let g = phase_shift(&f, s as f64).unwrap();
        let r = roll(&f, s);
        let worst = g.data.iter().zip(&r.data).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst <= 1e-6, "shift {s}: {worst}");
    }
}

#[test]
fn half_pixel_shift_of_cosine_is_analytic() {
    let n = 64;
    for f in [1usize, 5, 13, 31] {
        let row: Vec<f32> = (0..n).map(|x| (2.0 * PI * (f * x) as f64 / n as f64).cos() as f32).collect();
        let fm = FeatureMap::new(1, n, 1, row).unwrap();
        let g = phase_shift(&fm, 0.5).unwrap();
        for x in 0..n {
            let want = (2.0 * PI * f as f64 * (x as f64 - 0.5) / n as f64).cos();
            assert!((g.data[x] as f64 - want).abs() <= 1e-6);
        }
    }
}

#[test]
fn phase_shift_matches_naive_dft() {
    let f = random_features(1, 24, 3, 3);
    for d in [0.3, -1.7, 4.25] {
        let g = phase_shift(&f, d).unwrap();
        for y in 0..3 {
            let want = naive_shift_row(&f.data[y * 24..(y + 1) * 24], d);
            for x in 0..24 {
                assert!((g.data[y * 24 + x] as f64 - want[x]).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn oversized_shift_rejected() {
    assert!(phase_shift(&random_features(1, 16, 1, 0), 8.5).is_err());
}

#[test]
fn disparity_grid_is_inclusive() {
    let g = disparity_grid(8.0, 0.25).unwrap();
    assert_eq!(g.len(), 33);
    assert_eq!(g[0], 0.0);
    assert_eq!(*g.last().unwrap(), 8.0);
    assert!(disparity_grid(1.0, 0.0).is_err());
}

fn interior_argmax_fraction(vol: &CostVolume, margin: usize, want: f64) -> f64 {
    let (w, h) = (vol.width(), vol.height());
    let mut hits = 0;
    let mut total = 0;
    for y in margin..h - margin {
        for x in margin..w - margin {
            let p = vol.profile(x, y);
            let i = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
            total += 1;
            if (vol.disparities()[i] - want).abs() < 1e-9 {
                hits += 1;
            }
        }
    }
    hits as f64 / total as f64
}

#[test]
fn self_correlation_peaks_at_zero() {
    let f = extract_features(&smooth_image(128, 96, 6, 4)).unwrap();
    let vol = build_cost_volume(&f, &f, 8.0, 0.25).unwrap();
    assert_eq!(interior_argmax_fraction(&vol, 8, 0.0), 1.0);
}

#[test]
fn integer_shift_recovered() {
    let f = extract_features(&smooth_image(128, 96, 6, 5)).unwrap();
    let vol = build_cost_volume(&f, &roll(&f, 2), 8.0, 0.25).unwrap();
    assert!(interior_argmax_fraction(&vol, 8, 2.0) >= 0.99);
}

#[test]
fn fractional_shift_matches_brute_force_argmax() {
    let f = extract_features(&smooth_image(96, 64, 6, 6)).unwrap();
    let right = phase_shift(&f, 1.5).unwrap();
    let vol = build_cost_volume(&f, &right, 4.0, 0.25).unwrap();
    // brute force: direct inner products against naive shifts of each row
    let (w, h) = (f.width, f.height);
    let rho = (0..w * h)
        .map(|p| (0..4).map(|c| (right.plane(c)[p] as f64).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut agree = 0;
    let mut at_truth = 0;
    let ys: Vec<usize> = (4..h - 4).step_by(7).collect();
    for &y in &ys {
        let shifted: Vec<Vec<Vec<f64>>> = vol
            .disparities()
            .iter()
            .map(|&d| (0..4).map(|c| naive_shift_row(&right.plane(c)[y * w..(y + 1) * w], -d)).collect())
            .collect();
        for x in 4..w - 4 {
            let scores: Vec<f64> = shifted
                .iter()
                .map(|s| {
                    let dot: f64 = (0..4).map(|c| f.plane(c)[y * w + x] as f64 * s[c][x]).sum();
                    let len = (0..4).map(|c| s[c][x] * s[c][x]).sum::<f64>().sqrt();
                    if len > 1e-6 * rho { dot * rho / len } else { 0.0 }
                })
                .collect();
            let oracle = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
            let p = vol.profile(x, y);
            let got = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
            agree += (oracle == got) as usize;
            at_truth += (vol.disparities()[got] == 1.5) as usize;
        }
    }
    let total = ys.len() * (w - 8);
    assert!(agree as f64 / total as f64 >= 0.99, "{agree}/{total}");
    assert!(at_truth as f64 / total as f64 >= 0.99, "{at_truth}/{total}");
}

#[test]
fn shift_covariance() {
    let f = extract_features(&smooth_image(128, 64, 6, 7)).unwrap();
    let base = build_cost_volume(&f, &roll(&f, 1), 8.0, 0.25).unwrap();
    let moved = build_cost_volume(&f, &phase_shift(&roll(&f, 1), 2.75).unwrap(), 8.0, 0.25).unwrap();
    let (db, _) = disparity_argmax(&base);
    let (dm, _) = disparity_argmax(&moved);
    let mut ok = 0;
    let mut total = 0;
    for y in 8..f.height - 8 {
        for x in 8..f.width - 8 {
            total += 1;
            if ((dm.get(x, y) - db.get(x, y)) as f64 - 2.75).abs() <= 0.125 + 1e-6 {
                ok += 1;
            }
        }
    }
    assert!(ok as f64 / total as f64 >= 0.99, "{ok}/{total}");
}

#[test]
fn aggregation_identity_constant_and_impulse() {
    let d = disparity_grid(2.0, 0.25).unwrap();
    let (w, h) = (9, 7);
    let rnd = random_features(d.len(), w, h, 8).data;
    let v = CostVolume::new(d.clone(), w, h, rnd).unwrap();
    assert_eq!(aggregate_cost(&v, 1).unwrap(), v);

    let c = CostVolume::new(d.clone(), w, h, vec![0.7; d.len() * w * h]).unwrap();
    assert!(aggregate_cost(&c, 3).unwrap().scores().iter().all(|s| (s - 0.7).abs() < 1e-6));

    let mut imp = vec![0.0; d.len() * w * h];
    imp[(4 * h + 3) * w + 4] = 1.0;
    let a = aggregate_cost(&CostVolume::new(d.clone(), w, h, imp).unwrap(), 3).unwrap();
    for i in 0..d.len() {
        for y in 0..h {
            for x in 0..w {
                let inside = (i as i64 - 4).abs() <= 1 && (y as i64 - 3).abs() <= 1 && (x as i64 - 4).abs() <= 1;
                let want = if inside { 1.0 / 27.0 } else { 0.0 };
                assert!((a.at(i, x, y) - want).abs() < 1e-7);
            }
        }
    }
    assert!(aggregate_cost(&v, 2).is_err());
    assert!(aggregate_cost(&v, 11).is_err());
}

#[test]
fn single_peak_flat_and_parabola() {
    let d = disparity_grid(6.0, 0.25).unwrap();
    let mut peak = vec![0.1f32; d.len()];
    peak[8] = 0.9;
    let (x, c) = refine_peak(&peak, &d);
    assert_eq!(x, 2.0);
    assert!(c > 0.0);

    let flat = vec![0.4f32; d.len()];
    let (_, c) = refine_peak(&flat, &d);
    assert_eq!(c, 0.0);

    let d1 = disparity_grid(8.0, 1.0).unwrap();
    let para: Vec<f32> = d1.iter().map(|&v| (5.0 - (v - 3.2) * (v - 3.2)) as f32).collect();
    let (x, _) = refine_peak(&para, &d1);
    assert!((x - 3.2).abs() < 1e-3, "{x}");
}

#[test]
fn confidence_compares_secondary_peak() {
    let d = disparity_grid(4.0, 0.5).unwrap();
    let s = [0.2, 1.0, 0.3, 0.1, 0.5, 0.2, 0.1, 0.0, 0.0f32];
    let (_, c) = refine_peak(&s, &d);
    assert!((c - 0.5).abs() < 1e-6);
    let (_, c) = refine_peak(&[-1.0, -0.5, -2.0], &d[..3]);
    assert_eq!(c, 0.0);
}

#[test]
fn pyramid_shapes_and_pooling() {
    let img = smooth_image(64, 64, 8, 9);
    let f = extract_features(&img).unwrap();
    let vol = build_cost_volume(&f, &f, 4.0, 0.5).unwrap();
    let pyr = disp_pyramid(&vol);
    let dims: Vec<(usize, usize)> = pyr.iter().map(|l| (l.width(), l.height())).collect();
    assert_eq!(dims, vec![(32, 32), (16, 16), (8, 8)]);

    let d = disparity_grid(1.0, 1.0).unwrap();
    let vals = vec![0.5f32; 2 * 6 * 6];
    let pyr = disp_pyramid(&CostVolume::new(d, 6, 6, vals).unwrap());
    assert_eq!((pyr[2].width(), pyr[2].height()), (2, 2));
    for l in &pyr {
        assert!(l.max_score.data.iter().all(|&v| v == 0.5));
        assert!(l.confidence.data.iter().all(|&v| v == 0.0));
    }

    let m = ScalarMap { width: 4, height: 2, data: vec![1.0, 3.0, 0.0, 4.0, 5.0, 7.0, 8.0, 0.0] };
    assert_eq!(m.pooled().data, vec![4.0, 3.0]);
}

#[test]
fn volume_rejects_mismatch() {
    let a = random_features(4, 16, 8, 1);
    let b = random_features(4, 18, 8, 1);
    assert!(build_cost_volume(&a, &b, 2.0, 0.5).is_err());
    assert!(CostVolume::new(vec![0.5, 1.0], 1, 1, vec![0.0, 0.0]).is_err());
}

#[test]
fn end_to_end_uniform_shift() {
    // right view = left view moved right by 3 full-resolution pixels
    let img = smooth_image(200, 96, 5, 10);
    let left = img.crop(4, 0, 192, 96).unwrap();
    let right = img.crop(1, 0, 192, 96).unwrap();
    let frame = DPFrame::new(left.clone(), right, left.replicate_rgb().unwrap()).unwrap();
    let res = estimate_disparity(&frame, &CostParams::default()).unwrap();
    let mut v: Vec<f32> = Vec::new();
    for y in 8..40 {
        for x in 8..88 {
            v.push(res.disparity.get(x, y));
        }
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = v[v.len() / 2];
    assert!((median - 1.5).abs() < 0.1, "{median}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cauchy_schwarz_bound(seed in any::<u64>(), d in 0.25f64..3.0) {
        let l = random_features(4, 32, 6, seed);
        let r = random_features(4, 32, 6, seed ^ 0xabc);
        let vol = build_cost_volume(&l, &r, d, 0.25).unwrap();
        for (i, &dd) in vol.disparities().iter().enumerate() {
            let shifted = phase_shift(&r, -dd).unwrap();
            let n = 32 * 6;
            let norm = |f: &FeatureMap, p: usize| (0..4).map(|c| (f.plane(c)[p] as f64).powi(2)).sum::<f64>().sqrt();
            let rmax = (0..n).map(|p| norm(&r, p)).fold(0.0, f64::max);
            for p in 0..n {
                prop_assert!(vol.plane(i)[p] as f64 <= norm(&l, p) * rmax + 1e-5);
            }
            let _ = shifted;
        }
    }

    #[test]
    fn shift_is_linear(seed in any::<u64>(), d in -4.0f64..4.0) {
        let a = random_features(1, 20, 2, seed);
        let b = random_features(1, 20, 2, seed.wrapping_add(1));
        let sum = FeatureMap::new(1, 20, 2, a.data.iter().zip(&b.data).map(|(x, y)| 2.0 * x - y).collect()).unwrap();
        let (sa, sb, ss) = (phase_shift(&a, d).unwrap(), phase_shift(&b, d).unwrap(), phase_shift(&sum, d).unwrap());
        for i in 0..40 {
            prop_assert!((ss.data[i] - (2.0 * sa.data[i] - sb.data[i])).abs() < 1e-5);
        }
    }
}
