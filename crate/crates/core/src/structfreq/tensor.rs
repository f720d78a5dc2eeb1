use crate::error::{Error, Result};
use crate::image::Image;

/// Planar `channels x height x width` float tensor split into a global
/// stream (channels `0..split`, handled in the frequency domain) and a local
/// stream (channels `split..`, handled by spatial convolution).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    channels: usize,
    height: usize,
    width: usize,
    split: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(channels: usize, height: usize, width: usize, split: usize, data: Vec<f32>) -> Result<Self> {
        if split > channels {
            return Err(Error::InvalidArgument(format!("split {split} exceeds {channels} channels")));
        }
        if data.len() != channels * height * width {
            return Err(Error::Dimensions(format!(
                "{channels}x{height}x{width} tensor needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("tensor values must be finite".into()));
        }
        Ok(Self { channels, height, width, split, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize, split: usize) -> Self {
        assert!(split <= channels);
        Self { channels, height, width, split, data: vec![0.0; channels * height * width] }
    }

    /// Wraps an image's planes; all channels local.
    pub fn from_image(img: &Image) -> Self {
        Self { channels: img.channels(), height: img.height(), width: img.width(), split: 0, data: img.data().to_vec() }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of global channels (stored first).
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_spatial(&self, o: &FeatureTensor) -> bool {
        (self.height, self.width) == (o.height, o.width)
    }

    fn slice(&self, from: usize, to: usize, split: usize) -> FeatureTensor {
        let n = self.height * self.width;
        FeatureTensor {
            channels: to - from,
            height: self.height,
            width: self.width,
            split,
            data: self.data[from * n..to * n].to_vec(),
        }
    }

    /// The global stream as an all-global tensor.
    pub fn global(&self) -> FeatureTensor {
        self.slice(0, self.split, self.split)
    }

    /// The local stream as an all-local tensor.
    pub fn local(&self) -> FeatureTensor {
        self.slice(self.split, self.channels, 0)
    }

    /// Stacks a global and a local stream.
    pub fn join(global: &FeatureTensor, local: &FeatureTensor) -> Result<FeatureTensor> {
        if !global.same_spatial(local) {
            return Err(Error::Dimensions("global and local streams differ spatially".into()));
        }
        let mut data = global.data.clone();
        data.extend_from_slice(&local.data);
        FeatureTensor::new(global.channels + local.channels, global.height, global.width, global.channels, data)
    }

    /// Channel concatenation keeping globals first: `[a.g, b.g, a.l, b.l]`.
    pub fn concat(a: &FeatureTensor, b: &FeatureTensor) -> Result<FeatureTensor> {
        if !a.same_spatial(b) {
            return Err(Error::Dimensions("concatenated tensors differ spatially".into()));
        }
        let g = FeatureTensor::join(&a.global(), &b.global())?;
        let l = FeatureTensor::join(&a.local(), &b.local())?;
        let mut data = g.data;
        data.extend_from_slice(&l.data);
        FeatureTensor::new(a.channels + b.channels, a.height, a.width, a.split + b.split, data)
    }

    /// 2x2 average pooling (even dims required).
    pub fn pool2(&self) -> Result<FeatureTensor> {
        if self.height % 2 != 0 || self.width % 2 != 0 {
            return Err(Error::Dimensions(format!("cannot pool {}x{}", self.height, self.width)));
        }
        let (h, w) = (self.height / 2, self.width / 2);
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            let p = self.plane(c);
            for y in 0..h {
                for x in 0..w {
                    let i = 2 * y * self.width + 2 * x;
                    let s = p[i] as f64 + p[i + 1] as f64 + p[i + self.width] as f64 + p[i + self.width + 1] as f64;
                    data.push((0.25 * s) as f32);
                }
            }
        }
        Ok(FeatureTensor { channels: self.channels, height: h, width: w, split: self.split, data })
    }

    /// Nearest-neighbour 2x upsampling.
    pub fn upsample2(&self) -> FeatureTensor {
        let (h, w) = (2 * self.height, 2 * self.width);
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            let p = self.plane(c);
            for y in 0..h {
                let row = &p[(y / 2) * self.width..(y / 2 + 1) * self.width];
                data.extend((0..w).map(|x| row[x / 2]));
            }
        }
        FeatureTensor { channels: self.channels, height: h, width: w, split: self.split, data }
    }

    pub(crate) fn from_planes(planes: Vec<Vec<f32>>, height: usize, width: usize, split: usize) -> Result<Self> {
        let channels = planes.len();
        FeatureTensor::new(channels, height, width, split, planes.concat())
    }
}
