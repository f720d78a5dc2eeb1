//! Seed derivation and content hashing.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{io_err, Result};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-item seed from a base seed and an index, stable across platforms and
/// independent of evaluation order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Seed for a named sub-stream (e.g. "depth", "augment") of an item seed.
pub fn substream(seed: u64, label: &str) -> u64 {
    let h = Sha256::digest(label.as_bytes());
    let mut tag = [0u8; 8];
    tag.copy_from_slice(&h[..8]);
    derive_seed(seed, u64::from_le_bytes(tag))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}
