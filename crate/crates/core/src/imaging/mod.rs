//! Raster containers and the pixel-level primitives shared by every other module.

mod flip;
mod fourier;
mod png_io;
mod resize;

pub use flip::HFlip;
pub use fourier::{dft2, idft2, Spectrum};
pub use png_io::{decode_png, encode_gray, encode_png, encode_rgba, DecodedImage, PngImage};
pub use resize::{resample_planes, ResizeBilinear};
pub(crate) use resize::{taps, Tap};

use crate::error::{Error, Result};

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be at least 1x1, got {height}x{width}"
        )));
    }
    Ok(())
}

/// Interleaved 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * 3 {
            return Err(Error::invalid(format!(
                "rgb buffer length {} does not match {height}x{width}x3",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self> {
        check_dims(height, width)?;
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(height * width * 3)
            .collect();
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One color channel scaled to `[0, 1]`.
    pub fn channel(&self, c: usize) -> GrayMap {
        assert!(c < 3, "channel index out of range");
        let values = self
            .data
            .iter()
            .skip(c)
            .step_by(3)
            .map(|&v| f64::from(v) / 255.0)
            .collect();
        GrayMap {
            height: self.height,
            width: self.width,
            values,
        }
    }

    /// Reassemble an image from three `[0, 1]` channel maps, rounding to 8 bits.
    pub fn from_channels(channels: [&GrayMap; 3]) -> Result<Self> {
        let (h, w) = channels[0].dims();
        if channels.iter().any(|c| c.dims() != (h, w)) {
            return Err(Error::invalid("channel maps differ in dimensions"));
        }
        let mut data = Vec::with_capacity(h * w * 3);
        for i in 0..h * w {
            for ch in &channels {
                data.push(unit_to_u8(ch.values[i]));
            }
        }
        Self::new(h, w, data)
    }

    /// Planar `[0, 1]` float layout (channel-major), as fed to the predictor.
    pub fn to_planar_unit(&self) -> Vec<f64> {
        let n = self.height * self.width;
        let mut out = vec![0.0; 3 * n];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * n + i] = f64::from(px[c]) / 255.0;
            }
        }
        out
    }
}

/// Interleaved 8-bit RGBA raster (straight, not premultiplied, alpha).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbaImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbaImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * 4 {
            return Err(Error::invalid(format!(
                "rgba buffer length {} does not match {height}x{width}x4",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 4] {
        let i = (y * self.width + x) * 4;
        [
            self.data[i],
            self.data[i + 1],
            self.data[i + 2],
            self.data[i + 3],
        ]
    }

    pub fn has_visible_pixel(&self) -> bool {
        self.data.chunks_exact(4).any(|px| px[3] > 0)
    }
}

/// Dense real-valued map with every value finite and inside `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GrayMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if values.len() != height * width {
            return Err(Error::invalid(format!(
                "map length {} does not match {height}x{width}",
                values.len()
            )));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::invalid(format!("map value {bad} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Builds a map, clamping every value into `[0, 1]`. Non-finite values are rejected.
    pub fn from_clamped(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(height, width, values)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Map each value through `f`; results are clamped into `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_clamped(
            self.height,
            self.width,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// 8-bit quantization: nearest of 256 levels.
    pub fn to_u8(&self) -> Vec<u8> {
        self.values.iter().map(|&v| unit_to_u8(v)).collect()
    }

    pub fn from_u8(height: usize, width: usize, data: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            data.iter().map(|&v| f64::from(v) / 255.0).collect(),
        )
    }

    /// Threshold at `t` (inclusive) into a binary mask.
    pub fn binarize(&self, t: f64) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| u8::from(v >= t)).collect(),
        }
    }
}

/// Per-pixel label in `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if values.len() != height * width {
            return Err(Error::invalid(format!(
                "mask length {} does not match {height}x{width}",
                values.len()
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.values[y * self.width + x] = u8::from(v);
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_gray(&self) -> GrayMap {
        GrayMap {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    /// `{0, 255}` encoding used for label PNGs.
    pub fn to_u8_levels(&self) -> Vec<u8> {
        self.values.iter().map(|&v| v * 255).collect()
    }

    /// Inverse of [`BinaryMask::to_u8_levels`]; any value ≥ 128 reads as foreground.
    pub fn from_u8_levels(height: usize, width: usize, data: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            data.iter().map(|&v| u8::from(v >= 128)).collect(),
        )
    }
}

pub(crate) fn unit_to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
