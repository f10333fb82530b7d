//! Photometric domain shift: gamma, per-channel gain, Gaussian noise, box blur.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ShiftConfig;
use crate::error::Result;
use crate::imaging::RgbImage;

/// Concrete shift drawn for one image; stored in the manifest so it can be replayed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub gamma: f64,
    pub color_scale: [f64; 3],
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub blur_radius: usize,
}

impl ShiftParams {
    pub fn sample(cfg: &ShiftConfig, rng: &mut impl Rng) -> Self {
        let uniform = |rng: &mut dyn rand::RngCore, r: [f64; 2]| {
            if r[0] == r[1] {
                r[0]
            } else {
                rng.random_range(r[0]..r[1])
            }
        };
        let gamma = uniform(rng, cfg.gamma);
        let color_scale = [
            uniform(rng, cfg.color_scale),
            uniform(rng, cfg.color_scale),
            uniform(rng, cfg.color_scale),
        ];
        let blur = cfg.blur_radius > 0 && rng.random_bool(cfg.blur_prob);
        Self {
            gamma,
            color_scale,
            noise_sigma: cfg.noise_sigma,
            noise_seed: rng.random(),
            blur_radius: if blur { cfg.blur_radius } else { 0 },
        }
    }
}

pub fn apply_shift(image: &RgbImage, p: &ShiftParams) -> Result<RgbImage> {
    let (h, w) = image.dims();
    let mut vals: Vec<f64> = image
        .as_raw()
        .iter()
        .enumerate()
        .map(|(i, &v)| (f64::from(v) / 255.0).powf(p.gamma) * p.color_scale[i % 3])
        .collect();
    if p.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(p.noise_seed);
        for v in &mut vals {
            let n: f64 = rng.sample(StandardNormal);
            *v += p.noise_sigma * n;
        }
    }
    if p.blur_radius > 0 {
        vals = box_blur(&vals, h, w, 3, p.blur_radius);
    }
    let data = vals
        .into_iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    RgbImage::new(h, w, data)
}

/// Separable box blur with clamp-to-edge borders.
fn box_blur(src: &[f64], h: usize, w: usize, ch: usize, r: usize) -> Vec<f64> {
    let norm = 1.0 / (2 * r + 1) as f64;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for d in 0..=2 * r {
                    let xx = (x + d).saturating_sub(r).min(w - 1);
                    acc += src[(y * w + xx) * ch + c];
                }
                tmp[(y * w + x) * ch + c] = acc * norm;
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for d in 0..=2 * r {
                    let yy = (y + d).saturating_sub(r).min(h - 1);
                    acc += tmp[(yy * w + x) * ch + c];
                }
                out[(y * w + x) * ch + c] = acc * norm;
            }
        }
    }
    out
}
