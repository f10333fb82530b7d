//! Procedural foreground objects and background textures.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{RgbImage, RgbaImage};
use crate::rng::stream;

/// An object bitmap with a transparent surround.
#[derive(Clone, Debug, PartialEq)]
pub struct ForegroundAsset {
    pub id: String,
    pub image: RgbaImage,
}

impl ForegroundAsset {
    pub fn new(id: impl Into<String>, image: RgbaImage) -> Result<Self> {
        if !image.has_visible_pixel() {
            return Err(Error::invalid(
                "foreground asset has no pixel with alpha > 0",
            ));
        }
        Ok(Self {
            id: id.into(),
            image,
        })
    }
}

/// A scene without a salient object.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundAsset {
    pub id: String,
    pub image: RgbImage,
}

impl BackgroundAsset {
    pub fn new(id: impl Into<String>, image: RgbImage, min_dims: (usize, usize)) -> Result<Self> {
        let (h, w) = image.dims();
        if h < min_dims.0 || w < min_dims.1 {
            return Err(Error::invalid(format!(
                "background {h}x{w} is smaller than the minimum canvas {}x{}",
                min_dims.0, min_dims.1
            )));
        }
        Ok(Self {
            id: id.into(),
            image,
        })
    }
}

/// Sizes used by the procedural generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProceduralSpec {
    pub fg_size: usize,
    pub bg_height: usize,
    pub bg_width: usize,
}

impl Default for ProceduralSpec {
    fn default() -> Self {
        Self {
            fg_size: 48,
            bg_height: 64,
            bg_width: 64,
        }
    }
}

pub fn fg_id(index: usize) -> String {
    format!("fg_{index:05}")
}

pub fn bg_id(index: usize) -> String {
    format!("bg_{index:05}")
}

pub fn procedural_assets(
    n_fg: usize,
    n_bg: usize,
    seed: u64,
    spec: ProceduralSpec,
) -> Result<(Vec<ForegroundAsset>, Vec<BackgroundAsset>)> {
    if n_fg == 0 || n_bg == 0 {
        return Err(Error::invalid("asset counts must be at least 1"));
    }
    let fgs = (0..n_fg)
        .map(|i| procedural_foreground(seed, i, spec.fg_size))
        .collect::<Result<Vec<_>>>()?;
    let bgs = (0..n_bg)
        .map(|i| procedural_background(seed, i, spec.bg_height, spec.bg_width))
        .collect::<Result<Vec<_>>>()?;
    Ok((fgs, bgs))
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = h.floor();
    let f = h - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as u32 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn vivid_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    hsv_to_rgb(
        rng.random::<f64>(),
        rng.random_range(0.6..1.0),
        rng.random_range(0.55..1.0),
    )
}

fn muted_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    hsv_to_rgb(
        rng.random::<f64>(),
        rng.random_range(0.0..0.3),
        rng.random_range(0.3..0.85),
    )
}

#[derive(Clone, Debug)]
enum Shape {
    Ellipse {
        cy: f64,
        cx: f64,
        ry: f64,
        rx: f64,
        angle: f64,
    },
    Polygon(Vec<(f64, f64)>),
    Union(Box<Shape>, Box<Shape>),
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        match self {
            Shape::Ellipse {
                cy,
                cx,
                ry,
                rx,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let dy = y - cy;
                let dx = x - cx;
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Polygon(pts) => {
                let mut inside = false;
                let mut j = pts.len() - 1;
                for i in 0..pts.len() {
                    let (yi, xi) = pts[i];
                    let (yj, xj) = pts[j];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
            Shape::Union(a, b) => a.contains(y, x) || b.contains(y, x),
        }
    }
}

fn random_ellipse(rng: &mut ChaCha8Rng, size: f64, cy: f64, cx: f64, scale: f64) -> Shape {
    Shape::Ellipse {
        cy,
        cx,
        ry: size * scale * rng.random_range(0.5..1.0),
        rx: size * scale * rng.random_range(0.5..1.0),
        angle: rng.random_range(0.0..PI),
    }
}

fn random_shape(rng: &mut ChaCha8Rng, size: f64) -> Shape {
    let cy = size / 2.0 + rng.random_range(-0.06..0.06) * size;
    let cx = size / 2.0 + rng.random_range(-0.06..0.06) * size;
    match rng.random_range(0..3u32) {
        0 => random_ellipse(rng, size, cy, cx, 0.42),
        1 => {
            let n = rng.random_range(3..8usize);
            // jittered but evenly spread vertices keep the polygon from collapsing to a sliver
            let step = 2.0 * PI / n as f64;
            let phase = rng.random_range(0.0..step);
            let pts = (0..n)
                .map(|i| {
                    let a = phase + step * (i as f64 + rng.random_range(0.0..0.7));
                    let r = size * rng.random_range(0.22..0.44);
                    (cy + r * a.sin(), cx + r * a.cos())
                })
                .collect();
            Shape::Polygon(pts)
        }
        _ => {
            let off = size * 0.12;
            let a = random_ellipse(rng, size, cy - off, cx - off, 0.3);
            let b = random_ellipse(rng, size, cy + off, cx + off, 0.3);
            Shape::Union(Box::new(a), Box::new(b))
        }
    }
}

const SUPERSAMPLE: usize = 4;

/// Deterministic anti-aliased object; depends only on `(seed, index, size)`.
pub fn procedural_foreground(seed: u64, index: usize, size: usize) -> Result<ForegroundAsset> {
    if size < 4 {
        return Err(Error::invalid("foreground size must be at least 4"));
    }
    let mut rng = stream(seed, "fg", index as u64);
    let sz = size as f64;
    let shape = random_shape(&mut rng, sz);
    let c0 = vivid_color(&mut rng);
    let gradient = rng.random_bool(0.5);
    let c1 = if gradient { vivid_color(&mut rng) } else { c0 };
    let dir = rng.random_range(0.0..2.0 * PI);
    let (gs, gc) = dir.sin_cos();

    let mut data = Vec::with_capacity(size * size * 4);
    let step = 1.0 / SUPERSAMPLE as f64;
    for y in 0..size {
        for x in 0..size {
            let mut covered = 0usize;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let py = y as f64 + (sy as f64 + 0.5) * step;
                    let px = x as f64 + (sx as f64 + 0.5) * step;
                    covered += usize::from(shape.contains(py, px));
                }
            }
            let t =
                (((y as f64 / sz - 0.5) * gs + (x as f64 / sz - 0.5) * gc) + 0.5).clamp(0.0, 1.0);
            for c in 0..3 {
                data.push(to_u8(c0[c] + (c1[c] - c0[c]) * t));
            }
            data.push(to_u8(covered as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64));
        }
    }
    let image = RgbaImage::new(size, size, data)?;
    ForegroundAsset::new(fg_id(index), image)
}

/// Deterministic low-contrast texture; depends only on `(seed, index, dims)`.
pub fn procedural_background(
    seed: u64,
    index: usize,
    height: usize,
    width: usize,
) -> Result<BackgroundAsset> {
    let mut rng = stream(seed, "bg", index as u64);
    let (h, w) = (height as f64, width as f64);
    let mut pixels = vec![[0.0f64; 3]; height * width];
    match rng.random_range(0..3u32) {
        0 => {
            // value noise on a coarse grid, smoothstep-interpolated
            let cells = rng.random_range(2..6usize);
            let grid: Vec<[f64; 3]> = (0..(cells + 1) * (cells + 1))
                .map(|_| muted_color(&mut rng))
                .collect();
            let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
            for y in 0..height {
                for x in 0..width {
                    let gy = y as f64 / h * cells as f64;
                    let gx = x as f64 / w * cells as f64;
                    let (iy, ix) = (gy.floor() as usize, gx.floor() as usize);
                    let (fy, fx) = (smooth(gy - iy as f64), smooth(gx - ix as f64));
                    let at = |r: usize, c: usize| grid[r.min(cells) * (cells + 1) + c.min(cells)];
                    let (a, b, c, d) = (
                        at(iy, ix),
                        at(iy, ix + 1),
                        at(iy + 1, ix),
                        at(iy + 1, ix + 1),
                    );
                    for k in 0..3 {
                        let top = a[k] + (b[k] - a[k]) * fx;
                        let bot = c[k] + (d[k] - c[k]) * fx;
                        pixels[y * width + x][k] = top + (bot - top) * fy;
                    }
                }
            }
        }
        1 => {
            let c0 = muted_color(&mut rng);
            let c1 = muted_color(&mut rng);
            let dir = rng.random_range(0.0..2.0 * PI);
            let (s, c) = dir.sin_cos();
            for y in 0..height {
                for x in 0..width {
                    let t =
                        ((y as f64 / h - 0.5) * s + (x as f64 / w - 0.5) * c + 0.5).clamp(0.0, 1.0);
                    for k in 0..3 {
                        pixels[y * width + x][k] = c0[k] + (c1[k] - c0[k]) * t;
                    }
                }
            }
        }
        _ => {
            let base = muted_color(&mut rng);
            let alt = muted_color(&mut rng);
            let period = rng.random_range(6.0..20.0);
            let dir = rng.random_range(0.0..PI);
            let (s, c) = dir.sin_cos();
            let contrast = rng.random_range(0.15..0.4);
            for y in 0..height {
                for x in 0..width {
                    let phase = (y as f64 * s + x as f64 * c) / period * 2.0 * PI;
                    let t = contrast * (0.5 + 0.5 * phase.sin());
                    for k in 0..3 {
                        pixels[y * width + x][k] = base[k] + (alt[k] - base[k]) * t;
                    }
                }
            }
        }
    }
    let data = pixels.iter().flat_map(|p| p.map(to_u8)).collect();
    BackgroundAsset::new(bg_id(index), RgbImage::new(height, width, data)?, (1, 1))
}
