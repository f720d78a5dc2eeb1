//! Portable Float Map reader/writer.
//!
//! Header is `PF` (RGB) or `Pf` (gray), then `width height`, then a scale
//! whose sign gives the byte order (negative = little-endian). Rows are
//! stored bottom-to-top with interleaved channels. We always write
//! little-endian and read either order.

use std::path::Path;

use super::{Image, Raster};
use crate::error::{io_err, Error, Result};

pub fn encode_pfm(r: &Raster) -> Result<Vec<u8>> {
    let magic = match r.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::Channels(format!("pfm stores 1 or 3 channels, got {c}"))),
    };
    let (w, h) = (r.width, r.height);
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * r.channels * 4);
    let plane = w * h;
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..r.channels {
                out.extend_from_slice(&r.data[c * plane + y * w + x].to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Splits off the next whitespace-delimited header token.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedPfm("truncated header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::MalformedPfm("non-ascii header".into()))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Raster> {
    let mut pos = 0;
    let channels = match token(bytes, &mut pos)? {
        "PF" => 3,
        "Pf" => 1,
        m => return Err(Error::MalformedPfm(format!("bad magic {m:?}"))),
    };
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedPfm(format!("bad dimension {s:?}")))
    };
    let w = parse_dim(token(bytes, &mut pos)?)?;
    let h = parse_dim(token(bytes, &mut pos)?)?;
    let scale: f32 = token(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::MalformedPfm("bad scale".into()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedPfm("scale must be finite and non-zero".into()));
    }
    if w == 0 || h == 0 {
        return Err(Error::Dimensions("pfm has a zero dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    let expected = w * h * channels * 4;
    if payload.len() != expected {
        let other = if channels == 1 { 3 } else { 1 };
        if payload.len() == w * h * other * 4 {
            return Err(Error::Channels(format!(
                "header declares {channels} channel(s) but payload holds {other}"
            )));
        }
        if payload.len() < expected {
            return Err(Error::MalformedPfm(format!(
                "truncated payload: {} of {expected} bytes",
                payload.len()
            )));
        }
        return Err(Error::MalformedPfm(format!(
            "trailing data: {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let little = scale < 0.0;
    let plane = w * h;
    let mut data = vec![0.0f32; plane * channels];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let c = i % channels;
        let px = i / channels;
        let (x, row) = (px % w, px / w);
        let y = h - 1 - row;
        data[c * plane + y * w + x] = v;
    }
    Raster::new(w, h, channels, data)
}

pub fn read_pfm(path: &Path) -> Result<Raster> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_pfm(&bytes)
}

pub fn write_pfm(r: &Raster, path: &Path) -> Result<()> {
    let bytes = encode_pfm(r)?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Loads a PFM as an [`Image`]; samples must lie in `[0, 1]`.
pub fn load_pfm(path: &Path) -> Result<Image> {
    Image::try_from(read_pfm(path)?)
}

pub fn save_pfm(img: &Image, path: &Path) -> Result<()> {
    write_pfm(&Raster::from(img.clone()), path)
}
