use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the dpfence library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png decode error: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode error: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("unsupported png format: {0}")]
    UnsupportedPng(String),

    #[error("malformed pfm: {0}")]
    MalformedPfm(String),

    #[error("malformed psf grid file: {0}")]
    MalformedPsfGrid(String),

    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("channel mismatch: {0}")]
    Channels(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("augmentation produced a degenerate mask ({coverage:.5} coverage)")]
    DegenerateMask { coverage: f64 },

    #[error("mask covers the entire image; nothing to inpaint from")]
    FullMask,

    #[error("missing predictions for samples: {0:?}")]
    MissingPredictions(Vec<String>),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
