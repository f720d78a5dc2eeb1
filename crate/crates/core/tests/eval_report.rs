use std::path::Path;

use dpfence::eval::{evaluate_dataset, PSNR_CAP_DB};
use dpfence::image::pfm::save_pfm;
use dpfence::image::png_io::{load_mask_png, save_mask_png};
use dpfence::synth::{generate_dataset, procedural, CleanFrame, DatasetManifest, SynthConfig, Synthesizer};
use dpfence::{DPFrame, DisparityAxis, Error, MaskImage};

fn dataset(root: &Path) -> DatasetManifest {
    let clean = vec![
        CleanFrame { id: "h".into(), frame: procedural::clean_frame(64, 48, 1).unwrap(), axis: DisparityAxis::Horizontal },
        CleanFrame { id: "v".into(), frame: procedural::clean_frame(48, 64, 2).unwrap(), axis: DisparityAxis::Vertical },
    ];
    let assets = vec![procedural::fence(96, 96, 3).unwrap()];
    let syn = Synthesizer::new(SynthConfig { base_seed: 5, ..Default::default() }).unwrap();
    generate_dataset(&clean, &assets, &syn, 3, root).unwrap()
}

/// Writes the ground truth mask and the stored clean image as a perfect
/// prediction for every sample.
fn perfect_predictions(manifest: &DatasetManifest, root: &Path, pred: &Path) {
    for r in &manifest.records {
        let dir = pred.join(&r.id);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::copy(root.join(&r.files.mask), dir.join("mask.png")).unwrap();
        let (clean, axis) = DPFrame::load_dir(&root.join(&r.files.clean)).unwrap();
        let stored = if axis == DisparityAxis::Vertical { clean.transpose() } else { clean };
        save_pfm(&stored.combined, &dir.join("restored.pfm")).unwrap();
    }
}

#[test]
fn perfect_predictions_score_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let (root, pred) = (tmp.path().join("data"), tmp.path().join("pred"));
    let manifest = dataset(&root);
    perfect_predictions(&manifest, &root, &pred);
    let report = evaluate_dataset(&manifest, &root, &pred).unwrap();
    assert_eq!(report.samples.len(), 3);
    for s in &report.samples {
        let m = &s.segmentation;
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let q = s.restored.unwrap();
        assert_eq!(q.psnr, PSNR_CAP_DB);
        assert!((q.ssim - 1.0).abs() <= 1e-9);
        assert!(s.occluded.psnr < PSNR_CAP_DB);
    }
    assert_eq!(report.mean.restored_samples, 3);
    assert_eq!(report.mean.f1, 1.0);
    let table = report.to_table();
    assert!(manifest.records.iter().all(|r| table.contains(&r.id)));
    let round: dpfence::eval::EvalReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    // the default float parser may be one ulp off
    assert_eq!(round.samples.iter().map(|s| &s.id).collect::<Vec<_>>(), report.samples.iter().map(|s| &s.id).collect::<Vec<_>>());
    assert!((round.mean.occluded_psnr - report.mean.occluded_psnr).abs() <= 1e-12);
}

#[test]
fn means_are_plain_averages_and_restoration_is_optional() {
    let tmp = tempfile::tempdir().unwrap();
    let (root, pred) = (tmp.path().join("data"), tmp.path().join("pred"));
    let manifest = dataset(&root);
    perfect_predictions(&manifest, &root, &pred);
    // one sample predicts nothing and supplies no restoration
    let id = &manifest.records[1].id;
    let gt = load_mask_png(&root.join(&manifest.records[1].files.mask)).unwrap();
    save_mask_png(&MaskImage::zeros(gt.width(), gt.height()), &pred.join(id).join("mask.png")).unwrap();
    std::fs::remove_file(pred.join(id).join("restored.pfm")).unwrap();
    let report = evaluate_dataset(&manifest, &root, &pred).unwrap();
    let f1: Vec<f64> = report.samples.iter().map(|s| s.segmentation.f1).collect();
    assert_eq!(f1, vec![1.0, 0.0, 1.0]);
    assert!((report.mean.f1 - 2.0 / 3.0).abs() < 1e-12);
    assert!(report.samples[1].restored.is_none());
    assert_eq!(report.mean.restored_samples, 2);
    assert_eq!(report.mean.psnr, Some(PSNR_CAP_DB));
    let occ: f64 = report.samples.iter().map(|s| s.occluded.psnr).sum::<f64>() / 3.0;
    assert!((report.mean.occluded_psnr - occ).abs() < 1e-12);
}

#[test]
fn missing_predictions_are_named() {
    let tmp = tempfile::tempdir().unwrap();
    let (root, pred) = (tmp.path().join("data"), tmp.path().join("pred"));
    let manifest = dataset(&root);
    perfect_predictions(&manifest, &root, &pred);
    std::fs::remove_dir_all(pred.join(&manifest.records[2].id)).unwrap();
    match evaluate_dataset(&manifest, &root, &pred) {
        Err(Error::MissingPredictions(ids)) => assert_eq!(ids, vec![manifest.records[2].id.clone()]),
        other => panic!("expected missing predictions, got {other:?}"),
    }
}
