//! Copy-paste compositing of one object onto one background.

use super::assets::{BackgroundAsset, ForegroundAsset};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ResizeBilinear, RgbImage, RgbaImage};

/// Alpha at or above this fraction marks a label pixel as salient.
pub const ALPHA_THRESHOLD: f64 = 0.5;

/// Object placement on the canvas. `center` is `(y, x)` in continuous canvas
/// coordinates, where pixel `i` spans `[i, i + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub scale_ratio: f64,
    pub center: (f64, f64),
}

/// Scaled dimensions of an object bitmap.
pub fn scaled_dims(dims: (usize, usize), scale_ratio: f64) -> (usize, usize) {
    let s = |d: usize| ((d as f64 * scale_ratio).round() as usize).max(1);
    (s(dims.0), s(dims.1))
}

/// Top-left canvas offset of a `(sh, sw)` object centred at `center`.
pub fn top_left(center: (f64, f64), sh: usize, sw: usize) -> (i64, i64) {
    (
        (center.0 - sh as f64 / 2.0).round() as i64,
        (center.1 - sw as f64 / 2.0).round() as i64,
    )
}

/// Alpha of the transformed object, laid out on the canvas grid (0 outside the object).
pub fn transformed_alpha(fg: &RgbaImage, canvas: (usize, usize), p: Placement) -> Result<Vec<u8>> {
    let (sh, sw) = scaled_dims(fg.dims(), p.scale_ratio);
    let scaled = fg.resize_bilinear(sh, sw)?;
    let (oy, ox) = top_left(p.center, sh, sw);
    let (h, w) = canvas;
    let mut alpha = vec![0u8; h * w];
    for y in 0..sh {
        let cy = oy + y as i64;
        if cy < 0 || cy >= h as i64 {
            continue;
        }
        for x in 0..sw {
            let cx = ox + x as i64;
            if cx < 0 || cx >= w as i64 {
                continue;
            }
            alpha[cy as usize * w + cx as usize] = scaled.pixel(y, x)[3];
        }
    }
    Ok(alpha)
}

pub fn label_from_alpha(alpha: u8) -> bool {
    f64::from(alpha) / 255.0 >= ALPHA_THRESHOLD
}

/// Paste `fg` (rescaled by `scale_ratio`) over `bg` centred at `center` and derive the
/// binary label from the transformed alpha.
pub fn compose(
    fg: &ForegroundAsset,
    bg: &BackgroundAsset,
    scale_ratio: f64,
    center: (f64, f64),
) -> Result<(RgbImage, BinaryMask)> {
    if !(scale_ratio > 0.0) || !scale_ratio.is_finite() {
        return Err(Error::invalid(format!(
            "scale ratio {scale_ratio} must be positive"
        )));
    }
    let (h, w) = bg.image.dims();
    let (sh, sw) = scaled_dims(fg.image.dims(), scale_ratio);
    let (oy, ox) = top_left(center, sh, sw);
    let overlaps = oy < h as i64 && oy + sh as i64 > 0 && ox < w as i64 && ox + sw as i64 > 0;
    if !overlaps {
        return Err(Error::InvalidPlacement {
            cy: center.0,
            cx: center.1,
        });
    }
    let scaled = fg.image.resize_bilinear(sh, sw)?;
    let mut image = bg.image.clone();
    let mut label = BinaryMask::zeros(h, w)?;
    let y_range = oy.max(0)..(oy + sh as i64).min(h as i64);
    let x_range = ox.max(0)..(ox + sw as i64).min(w as i64);
    for cy in y_range {
        for cx in x_range.clone() {
            let px = scaled.pixel((cy - oy) as usize, (cx - ox) as usize);
            let a = f64::from(px[3]) / 255.0;
            let (cy, cx) = (cy as usize, cx as usize);
            let under = image.pixel(cy, cx);
            let mut out = [0u8; 3];
            for c in 0..3 {
                let v = a * f64::from(px[c]) + (1.0 - a) * f64::from(under[c]);
                out[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            image.set_pixel(cy, cx, out);
            label.set(cy, cx, label_from_alpha(px[3]));
        }
    }
    Ok((image, label))
}
