//! Dual-pixel fence segmentation and removal.
//!
//! The crate is organised along the processing pipeline:
//!
//! - [`image`]: planar rasters, masks, dual-pixel frames, PNG/PFM IO
//! - [`dpform`]: half-aperture PSFs, spatially varying blur, view formation
//! - [`synth`]: fence asset augmentation, compositing and dataset generation
//! - [`costvol`]: features, phase-shift cost volume, disparity readout
//! - [`structfreq`]: spectral transform, FFC block, attention gating, periodicity
//! - [`defence`]: dual-cue segmentation, mask morphology, harmonic inpainting
//! - [`eval`]: segmentation and restoration metrics, histogram matching, reports

pub mod costvol;
pub mod defence;
pub mod dpform;
pub mod error;
pub mod eval;
mod fft;
mod ops;
pub mod hashing;
pub mod image;
pub mod structfreq;
pub mod synth;

pub use error::{Error, Result};
pub use image::{green_channel, DPFrame, DisparityAxis, Image, MaskImage, Raster};
