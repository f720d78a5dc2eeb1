//! 8/16-bit PNG load and 16-bit save.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::{Image, MaskImage};
use crate::error::{io_err, Error, Result};

/// Loads a gray or RGB PNG (alpha is dropped) with 8 or 16 bits per sample.
pub fn load_png(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(io_err(path))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedPng("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf)?;
    let (w, h) = (info.width as usize, info.height as usize);
    if w == 0 || h == 0 {
        return Err(Error::Dimensions("png has a zero dimension".into()));
    }
    let (src_channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => return Err(Error::UnsupportedPng(format!("color type {other:?}"))),
    };
    let bytes_per_sample = match info.bit_depth {
        png::BitDepth::Eight => 1,
        png::BitDepth::Sixteen => 2,
        other => return Err(Error::UnsupportedPng(format!("bit depth {other:?}"))),
    };
    let line = info.line_size;
    let plane = w * h;
    let mut data = vec![0.0f32; plane * keep];
    for y in 0..h {
        let row = &buf[y * line..(y + 1) * line];
        for x in 0..w {
            for c in 0..keep {
                let i = (x * src_channels + c) * bytes_per_sample;
                let v = if bytes_per_sample == 1 {
                    row[i] as f32 / 255.0
                } else {
                    u16::from_be_bytes([row[i], row[i + 1]]) as f32 / 65535.0
                };
                data[c * plane + y * w + x] = v;
            }
        }
    }
    Image::new(w, h, keep, data)
}

fn encode(img: &Image, depth16: bool) -> Vec<u8> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let plane = w * h;
    let data = img.data();
    let mut out = Vec::with_capacity(plane * ch * if depth16 { 2 } else { 1 });
    for i in 0..plane {
        for c in 0..ch {
            let v = data[c * plane + i];
            if depth16 {
                out.extend_from_slice(&((v * 65535.0).round() as u16).to_be_bytes());
            } else {
                out.push((v * 255.0).round() as u8);
            }
        }
    }
    out
}

fn write(img: &Image, path: &Path, depth16: bool) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    enc.set_color(if img.channels() == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
    enc.set_depth(if depth16 { png::BitDepth::Sixteen } else { png::BitDepth::Eight });
    let mut writer = enc.write_header()?;
    writer.write_image_data(&encode(img, depth16))?;
    writer.finish()?;
    Ok(())
}

/// Saves as 16-bit PNG; round trip error is at most 1/65535 per sample.
pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    write(img, path, true)
}

/// Saves as 8-bit PNG, for previews and binary masks.
pub fn save_png8(img: &Image, path: &Path) -> Result<()> {
    write(img, path, false)
}

pub fn save_mask_png(mask: &MaskImage, path: &Path) -> Result<()> {
    save_png8(&mask.to_image(), path)
}

pub fn load_mask_png(path: &Path) -> Result<MaskImage> {
    let img = load_png(path)?;
    let img = if img.channels() == 3 { img.channel(0)? } else { img };
    MaskImage::from_image(&img)
}
