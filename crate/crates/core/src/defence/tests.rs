use super::*;
use crate::eval::{precision_recall_f1, psnr};
use crate::structfreq::FreqDpWeights;
use crate::synth::procedural::{self, FenceSpec, FenceStyle};
use crate::synth::{composite, SynthConfig, Synthesizer};

fn boundary(m: &MaskImage) -> Vec<bool> {
    let (w, h) = (m.width(), m.height());
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            m.is_set(x, y)
                && [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|&(dx, dy)| {
                    let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                    (0..w as i64).contains(&sx) && (0..h as i64).contains(&sy) && !m.is_set(sx as usize, sy as usize)
                })
        })
        .collect()
}

#[test]
fn defaults_and_validation() {
    let c = SegmentConfig::default();
    assert_eq!((c.tau_d, c.tau_c, c.w_geo, c.radius, c.tau_m), (1.0, 0.2, 0.7, 2, 0.5));
    assert!(c.validate().is_ok());
    assert!(SegmentConfig { w_struct: 0.5, ..c }.validate().is_err());
    assert!(SegmentConfig { tau_c: 0.0, ..c }.validate().is_err());
    assert!(SegmentConfig { tau_m: 1.0, ..c }.validate().is_err());
    assert!(SegmentConfig { periodicity_window: 48, ..c }.validate().is_err());
    assert!(c.geometry_only().validate().is_ok() && c.structure_only().validate().is_ok());
    let json = serde_json::to_string(&c).unwrap();
    assert_eq!(serde_json::from_str::<SegmentConfig>(&json).unwrap(), c);
    assert!(serde_json::from_str::<SegmentConfig>(r#"{"tau_x": 1}"#).is_err());
    assert_eq!(serde_json::from_str::<SegmentConfig>(r#"{"tau_d": 2.0}"#).unwrap().tau_m, 0.5);
}

#[test]
fn geometric_cue_ramp_and_abstention() {
    let d = ScalarMap { width: 5, height: 1, data: vec![0.0, 0.5, 1.0, 1.5, 3.0] };
    let sure = ScalarMap { width: 5, height: 1, data: vec![1.0; 5] };
    let g = geometric_cue(&d, &sure, 1.0, 0.2);
    assert_eq!(g.data, vec![0.0, 0.0, 0.5, 1.0, 1.0]);
    let unsure = ScalarMap { width: 5, height: 1, data: vec![0.0; 5] };
    assert!(geometric_cue(&d, &unsure, 1.0, 0.2).data.iter().all(|&v| v == 0.5));
    let half = ScalarMap { width: 5, height: 1, data: vec![0.1; 5] };
    assert_eq!(geometric_cue(&d, &half, 1.0, 0.2).data[4], 0.75);
}

#[test]
fn clean_scenes_stay_almost_empty() {
    let cfg = SegmentConfig::default();
    for seed in 0..20 {
        let frame = procedural::clean_frame(256, 256, 500 + seed).unwrap();
        let m = segment_fence(&frame, &cfg).unwrap();
        assert!(m.is_binary());
        assert!(m.coverage() < 0.02, "scene {seed}: {}", m.coverage());
        let (restored, dilated) = remove_fence(&frame, &cfg).unwrap();
        for (i, (&a, &b)) in restored.data().iter().zip(frame.combined.data()).enumerate() {
            if dilated.data()[i % (256 * 256)] == 0.0 {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

#[test]
fn flat_fence_boundary_from_geometry_alone() {
    let spec = FenceSpec {
        style: FenceStyle::Pickets,
        period: 64.0,
        thickness: 22.0,
        angle_deg: 45.0,
        color: [0.05, 0.05, 0.05],
        texture: 0.0,
        seed: 3,
    };
    let syn = Synthesizer::new(SynthConfig::default()).unwrap();
    let grids = syn.grids(syn.alpha(0.1).unwrap()).unwrap();
    let clean = procedural::clean_frame(256, 256, 9).unwrap();
    let (occluded, soft) = composite(&clean, &spec.render(256, 256).unwrap(), &grids).unwrap();
    let gt = soft.threshold(0.5);
    let pred = segment_fence(&occluded, &SegmentConfig::default().geometry_only()).unwrap();
    let near = dilate_mask(&MaskImage::from_bools(256, 256, &boundary(&gt)).unwrap(), 2).unwrap();
    let pb = boundary(&pred);
    let total = pb.iter().filter(|&&b| b).count();
    let close = pb.iter().zip(near.data()).filter(|(&b, &n)| b && n == 1.0).count();
    assert!(total > 0);
    assert!(close as f64 >= 0.9 * total as f64, "{close} of {total} boundary pixels near the ground truth");
}

#[test]
fn synthetic_sample_segmented_and_restored() {
    let syn = Synthesizer::new(SynthConfig { depth_range_m: [0.10, 0.20], ..Default::default() }).unwrap();
    let clean = procedural::clean_frame(256, 256, 21).unwrap();
    let s = syn.synthesize_sample(&clean, &procedural::fence(256, 256, 22).unwrap(), 0).unwrap();
    let r = remove_fence_detailed(&s.occluded, &SegmentConfig::default()).unwrap();
    let m = precision_recall_f1(&r.segmentation.mask, &s.mask).unwrap();
    assert!(m.f1 > 0.8, "{m:?}");
    let before = psnr(&s.occluded.combined, &clean.combined, 1.0).unwrap();
    let after = psnr(&r.restored, &clean.combined, 1.0).unwrap();
    assert!(after > before + 3.0, "{before} -> {after}");
    for c in 0..3 {
        for (i, (&a, &b)) in r.restored.plane(c).iter().zip(s.occluded.combined.plane(c)).enumerate() {
            if r.mask.data()[i] == 0.0 {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

#[test]
fn exact_mask_over_constant_background() {
    let bg = DPFrame::in_focus(Image::filled(128, 96, 3, 0.6).unwrap()).unwrap();
    let asset = procedural::fence(128, 96, 4).unwrap();
    let syn = Synthesizer::new(SynthConfig::default()).unwrap();
    let (occluded, soft) = composite(&bg, &asset, &syn.grids(0.0).unwrap()).unwrap();
    let gt = soft.threshold(0.5);
    let restored = inpaint(&occluded.combined, &gt).unwrap();
    assert!(psnr(&restored, &bg.combined, 1.0).unwrap() >= 40.0);
}

#[test]
fn larger_radius_only_grows_the_fill_region() {
    let syn = Synthesizer::new(SynthConfig { depth_range_m: [0.10, 0.20], ..Default::default() }).unwrap();
    let clean = procedural::clean_frame(128, 128, 31).unwrap();
    let s = syn.synthesize_sample(&clean, &procedural::fence(128, 128, 32).unwrap(), 1).unwrap();
    let seg = segment_fence(&s.occluded, &SegmentConfig::default()).unwrap();
    let masks: Vec<MaskImage> = (0..4).map(|r| dilate_mask(&seg, r).unwrap()).collect();
    for pair in masks.windows(2) {
        assert!(pair[0].data().iter().zip(pair[1].data()).all(|(a, b)| a <= b));
    }
}

#[test]
fn learned_toy_mode_shapes() {
    let frame = procedural::clean_frame(64, 48, 1).unwrap();
    let (soft, binary) = segment_fence_learned(&frame, &SegmentConfig::default(), &FreqDpWeights::seeded(0)).unwrap();
    assert_eq!((soft.width(), soft.height()), (64, 48));
    assert!(binary.is_binary());
    assert!(segment_fence_learned(&procedural::clean_frame(60, 48, 1).unwrap(), &SegmentConfig::default(), &FreqDpWeights::seeded(0)).is_err());
}

#[test]
fn odd_frames_are_rejected() {
    let frame = procedural::clean_frame(65, 64, 1).unwrap();
    assert!(segment_fence(&frame, &SegmentConfig::default()).is_err());
}
