//! Planar float rasters, masks, dual-pixel frames and their file formats.
//!
//! All rasters are stored channel-major ("planar"): channel `c` occupies the
//! contiguous range `c*w*h .. (c+1)*w*h`, and within a plane pixels are
//! row-major. Single-channel views are therefore plain slices.

mod frame;
pub mod pfm;
pub mod png_io;

pub use frame::{load_any, DPFrame, DisparityAxis};

use crate::error::{Error, Result};

/// Unbounded float raster. Used for lossless transport of intermediates
/// (cost slices, features, weights) that are not confined to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Dimensions(format!(
                "raster must be non-empty, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimensions(format!(
                "data length {} != {width}*{height}*{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }
}

/// A 1- or 3-channel image with every sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

fn check_shape(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimensions(format!("image must be non-empty, got {width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::Channels(format!("images have 1 or 3 channels, got {channels}")));
    }
    if len != width * height * channels {
        return Err(Error::Dimensions(format!(
            "data length {len} != {width}*{height}*{channels}"
        )));
    }
    Ok(())
}

impl Image {
    /// Builds an image, rejecting non-finite or out-of-range samples.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_shape(width, height, channels, data.len())?;
        if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Range(format!("sample {i} = {v} outside [0,1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image, clamping samples into `[0, 1]`. NaN is still an error.
    pub fn from_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f32>) -> Result<Self> {
        check_shape(width, height, channels, data.len())?;
        for (i, v) in data.iter_mut().enumerate() {
            if v.is_nan() {
                return Err(Error::Range(format!("sample {i} is NaN")));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Evaluates `f(channel, x, y)` for every sample and clamps the result.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::from_clamped(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    /// Mean over all samples, accumulated in f64.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Single channel `c` as a 1-channel image.
    pub fn channel(&self, c: usize) -> Result<Image> {
        if c >= self.channels {
            return Err(Error::Channels(format!("channel {c} of {}-channel image", self.channels)));
        }
        Ok(Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
        })
    }

    /// Stacks single-channel planes into one image.
    pub fn from_planes(planes: &[&Image]) -> Result<Image> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Channels("no planes to stack".into()))?;
        let mut data = Vec::with_capacity(first.plane_len() * planes.len());
        for p in planes {
            if p.channels != 1 || p.width != first.width || p.height != first.height {
                return Err(Error::Dimensions("planes must be 1-channel and equal size".into()));
            }
            data.extend_from_slice(&p.data);
        }
        Image::new(first.width, first.height, planes.len(), data)
    }

    /// Replicates a grayscale image into three identical channels.
    pub fn replicate_rgb(&self) -> Result<Image> {
        if self.channels != 1 {
            return Err(Error::Channels("replicate_rgb expects a 1-channel image".into()));
        }
        Image::from_planes(&[self, self, self])
    }

    pub fn transpose(&self) -> Image {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; self.data.len()];
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = &mut data[c * w * h..(c + 1) * w * h];
            for y in 0..h {
                for x in 0..w {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
        Image { width: h, height: w, channels: self.channels, data }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Dimensions(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for c in 0..self.channels {
            let p = self.plane(c);
            for y in y0..y0 + h {
                data.extend_from_slice(&p[y * self.width + x0..y * self.width + x0 + w]);
            }
        }
        Ok(Image { width: w, height: h, channels: self.channels, data })
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

impl From<Image> for Raster {
    fn from(img: Image) -> Raster {
        Raster { width: img.width, height: img.height, channels: img.channels, data: img.data }
    }
}

impl TryFrom<Raster> for Image {
    type Error = Error;

    fn try_from(r: Raster) -> Result<Image> {
        Image::new(r.width, r.height, r.channels, r.data)
    }
}

/// Returns the green channel (index 1) of an RGB image.
pub fn green_channel(img: &Image) -> Result<Image> {
    if img.channels() != 3 {
        return Err(Error::Channels(format!(
            "green_channel expects 3 channels, got {}",
            img.channels()
        )));
    }
    img.channel(1)
}

/// Single-channel mask, soft (`[0, 1]`) or binary (exact 0/1).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        let img = Image::new(width, height, 1, data)?;
        Ok(Self { width, height, data: img.data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_bools(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimensions("mask length mismatch".into()));
        }
        Self::new(width, height, bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.get(x, y) >= 0.5
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Binary mask: 1 where the soft value is `>= t`.
    pub fn threshold(&self, t: f32) -> MaskImage {
        MaskImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v >= t { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Fraction of pixels that are set (`>= 0.5`).
    pub fn coverage(&self) -> f64 {
        self.data.iter().filter(|&&v| v >= 0.5).count() as f64 / self.data.len() as f64
    }

    pub fn bits(&self) -> Vec<bool> {
        self.data.iter().map(|&v| v >= 0.5).collect()
    }

    pub fn to_image(&self) -> Image {
        Image { width: self.width, height: self.height, channels: 1, data: self.data.clone() }
    }

    pub fn from_image(img: &Image) -> Result<MaskImage> {
        if img.channels() != 1 {
            return Err(Error::Channels("masks are single-channel".into()));
        }
        Ok(MaskImage { width: img.width(), height: img.height(), data: img.data().to_vec() })
    }

    pub fn transpose(&self) -> MaskImage {
        MaskImage::from_image(&self.to_image().transpose()).expect("1-channel")
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<MaskImage> {
        MaskImage::from_image(&self.to_image().crop(x0, y0, w, h)?)
    }
}
