//! The structural cue: fast-Fourier-convolution building blocks, attention
//! gating by disparity features, a classical periodicity detector, and a
//! forward-only toy network assembled from them.
//!
//! Tensors keep their global (spectral) channels first; `split` counts them.

mod conv;
mod ffc;
mod network;
mod periodicity;
mod sam;
mod spectral;
mod tensor;

pub use conv::Conv2d;
pub use ffc::{ffc_block, FfcWeights};
pub use network::{disparity_tensor, freqdp_forward, FreqDpWeights, DISP_CHANNELS, WIDTHS};
pub use periodicity::periodicity_score;
pub use sam::{sam_fuse, SamWeights};
pub use spectral::{spectral_transform, SpectralWeights};
pub use tensor::FeatureTensor;
