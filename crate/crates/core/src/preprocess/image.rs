use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Rgb,
    /// CIELAB with `L` scaled to 0..=255 and `a`, `b` offset by 128.
    Lab,
    /// Hexcone HSV with hue scaled from 0..360 degrees to 0..=255.
    Hsv,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorSpace::Rgb => "RGB",
            ColorSpace::Lab => "LAB",
            ColorSpace::Hsv => "HSV",
            ColorSpace::Gray => "GRAY",
        })
    }
}

/// 8-bit raster, row-major with interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageU8 {
    width: usize,
    height: usize,
    space: ColorSpace,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, space: ColorSpace, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!("empty image {width}x{height}")));
        }
        let expected = width * height * space.channels();
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "{width}x{height} {space} image needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            space,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, space: ColorSpace, value: &[u8]) -> Result<Self> {
        if value.len() != space.channels() {
            return Err(Error::Validation(format!(
                "fill value has {} channels, {space} needs {}",
                value.len(),
                space.channels()
            )));
        }
        let data = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * value.len())
            .collect();
        Self::new(width, height, space, data)
    }

    /// Builds an image from a per-pixel function returning all channels.
    pub fn from_fn<const C: usize>(
        width: usize,
        height: usize,
        space: ColorSpace,
        mut f: impl FnMut(usize, usize) -> [u8; C],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * C);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, space, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn channels(&self) -> usize {
        self.space.channels()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = self.channels();
        &self.data[(y * self.width + x) * c..][..c]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels())
    }

    pub fn same_shape(&self, other: &ImageU8) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn require(&self, space: ColorSpace, op: &str) -> Result<()> {
        if self.space != space {
            return Err(Error::Validation(format!(
                "{op} expects a {space} image, got {}",
                self.space
            )));
        }
        Ok(())
    }

    /// Same pixels under a different tag with the same channel count.
    pub fn retag(mut self, space: ColorSpace) -> Result<Self> {
        if space.channels() != self.channels() {
            return Err(Error::Validation(format!(
                "cannot retag {} as {space}",
                self.space
            )));
        }
        self.space = space;
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

impl fmt::Debug for ImageU8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ImageU8({}x{} {})", self.width, self.height, self.space)
    }
}
