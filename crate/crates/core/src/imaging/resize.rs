//! Bilinear resampling with half-pixel-center alignment.
//!
//! Output pixel `(i, j)` samples source coordinate
//! `((i + 0.5) * H / new_h - 0.5, (j + 0.5) * W / new_w - 0.5)`, clamped to the border.

use super::{check_dims, unit_to_u8, BinaryMask, GrayMap, RgbImage, RgbaImage};
use crate::error::{Error, Result};

/// Bilinear resize to `(new_h, new_w)`.
pub trait ResizeBilinear: Sized {
    fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Self>;
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

/// Interpolation taps for resampling an axis of length `src` to `dst`.
pub(crate) fn taps(src: usize, dst: usize) -> Vec<Tap> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            Tap {
                lo,
                hi,
                frac: s - lo as f64,
            }
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Resample an interleaved buffer of `channels` planes. Each output value is a convex
/// combination of its four neighbours and is clamped to their range.
pub fn resample_planes(
    src: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    new_h: usize,
    new_w: usize,
) -> Result<Vec<f64>> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::invalid(format!(
            "resize target must be at least 1x1, got {new_h}x{new_w}"
        )));
    }
    check_dims(height, width)?;
    debug_assert_eq!(src.len(), height * width * channels);
    if (new_h, new_w) == (height, width) {
        return Ok(src.to_vec());
    }
    let ty = taps(height, new_h);
    let tx = taps(width, new_w);
    let mut out = Vec::with_capacity(new_h * new_w * channels);
    for row in &ty {
        let r0 = row.lo * width;
        let r1 = row.hi * width;
        for col in &tx {
            for c in 0..channels {
                let a = src[(r0 + col.lo) * channels + c];
                let b = src[(r0 + col.hi) * channels + c];
                let cc = src[(r1 + col.lo) * channels + c];
                let d = src[(r1 + col.hi) * channels + c];
                let top = lerp(a, b, col.frac);
                let bottom = lerp(cc, d, col.frac);
                let v = lerp(top, bottom, row.frac);
                let lo = a.min(b).min(cc).min(d);
                let hi = a.max(b).max(cc).max(d);
                out.push(v.clamp(lo, hi));
            }
        }
    }
    Ok(out)
}

impl ResizeBilinear for GrayMap {
    fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Self> {
        let values = resample_planes(self.values(), self.height, self.width, 1, new_h, new_w)?;
        Ok(GrayMap {
            height: new_h,
            width: new_w,
            values,
        })
    }
}

fn resize_u8(
    data: &[u8],
    height: usize,
    width: usize,
    channels: usize,
    new_h: usize,
    new_w: usize,
) -> Result<Vec<u8>> {
    let src: Vec<f64> = data.iter().map(|&v| f64::from(v) / 255.0).collect();
    let out = resample_planes(&src, height, width, channels, new_h, new_w)?;
    Ok(out.into_iter().map(unit_to_u8).collect())
}

impl ResizeBilinear for RgbImage {
    fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Self> {
        if (new_h, new_w) == self.dims() {
            return Ok(self.clone());
        }
        let data = resize_u8(&self.data, self.height, self.width, 3, new_h, new_w)?;
        RgbImage::new(new_h, new_w, data)
    }
}

impl ResizeBilinear for RgbaImage {
    fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Self> {
        if (new_h, new_w) == self.dims() {
            return Ok(self.clone());
        }
        let data = resize_u8(&self.data, self.height, self.width, 4, new_h, new_w)?;
        RgbaImage::new(new_h, new_w, data)
    }
}

impl BinaryMask {
    /// Bilinear resize of the mask viewed as a real map.
    pub fn resize_soft(&self, new_h: usize, new_w: usize) -> Result<GrayMap> {
        self.to_gray().resize_bilinear(new_h, new_w)
    }
}
