//! Segmentation and restoration metrics, histogram matching, and
//! dataset-level evaluation reports.

mod histogram;
mod metrics;
mod report;
mod ssim;

pub use histogram::{histogram_match, HISTOGRAM_BINS};
pub use metrics::{masked_psnr, precision_recall_f1, psnr, SegMetrics, PSNR_CAP_DB};
pub use report::{evaluate_dataset, EvalReport, MeanMetrics, QualityMetrics, SampleEval, REPORT_SCHEMA_VERSION};
pub use ssim::{ssim, SSIM_SIGMA, SSIM_WINDOW};
