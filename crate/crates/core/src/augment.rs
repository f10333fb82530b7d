//! Reversible augmentations used to probe prediction consistency.
//!
//! Every augmentation has an inverse on prediction maps that returns them to the frame of
//! the un-augmented pseudo-label. FDA only perturbs appearance, so its inverse is the
//! geometric identity.

use std::collections::HashMap;

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::AugConfig;
use crate::error::{Error, Result};
use crate::imaging::{dft2, idft2, GrayMap, HFlip, ResizeBilinear, RgbImage, Spectrum};
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentationSpec {
    Identity,
    Flip,
    Scale { height: usize, width: usize },
    Fda { beta: f64, style_id: String },
}

/// Source of style images for FDA.
pub trait StylePool {
    fn style(&self, id: &str) -> Option<&RgbImage>;
}

impl StylePool for HashMap<String, RgbImage> {
    fn style(&self, id: &str) -> Option<&RgbImage> {
        self.get(id)
    }
}

/// Empty pool, for augmentation sets without FDA.
pub struct NoStyles;

impl StylePool for NoStyles {
    fn style(&self, _id: &str) -> Option<&RgbImage> {
        None
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            AugmentationSpec::Scale { height, width } if *height == 0 || *width == 0 => {
                Err(Error::invalid("scale augmentation needs dimensions >= 1"))
            }
            AugmentationSpec::Fda { beta, .. } if !(0.0..=1.0).contains(beta) => {
                Err(Error::invalid(format!("fda beta {beta} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

pub fn apply(spec: &AugmentationSpec, image: &RgbImage, pool: &dyn StylePool) -> Result<RgbImage> {
    spec.validate()?;
    match spec {
        AugmentationSpec::Identity => Ok(image.clone()),
        AugmentationSpec::Flip => Ok(image.hflip()),
        AugmentationSpec::Scale { height, width } => image.resize_bilinear(*height, *width),
        AugmentationSpec::Fda { beta, style_id } => {
            let style = pool
                .style(style_id)
                .ok_or_else(|| Error::MissingStyle(style_id.clone()))?;
            fda_swap(image, style, *beta)
        }
    }
}

/// Map a prediction made on the augmented image back to `original_dims`.
pub fn invert(
    spec: &AugmentationSpec,
    pred: &GrayMap,
    original_dims: (usize, usize),
) -> Result<GrayMap> {
    let expected = match spec {
        AugmentationSpec::Scale { height, width } => (*height, *width),
        _ => original_dims,
    };
    if pred.dims() != expected {
        return Err(Error::invalid(format!(
            "prediction is {:?}, expected {:?} for {:?}",
            pred.dims(),
            expected,
            spec
        )));
    }
    match spec {
        AugmentationSpec::Identity | AugmentationSpec::Fda { .. } => Ok(pred.clone()),
        AugmentationSpec::Flip => Ok(pred.hflip()),
        AugmentationSpec::Scale { .. } => pred.resize_bilinear(original_dims.0, original_dims.1),
    }
}

/// Side length of the swapped low-frequency band along one axis.
pub fn band_side(beta: f64, n: usize) -> usize {
    ((beta * n as f64).floor() as usize).clamp(1, n)
}

/// Replace the amplitude of `src` with that of `style` inside the centred low-frequency
/// rectangle, keeping the phase of `src` everywhere.
pub fn swap_amplitude(src: &Spectrum, style: &Spectrum, beta: f64) -> Result<Spectrum> {
    if src.dims() != style.dims() {
        return Err(Error::invalid("spectra differ in dimensions"));
    }
    let (h, w) = src.dims();
    let (bh, bw) = (band_side(beta, h), band_side(beta, w));
    // rows/cols of the band in the centred (DC-at-middle) layout
    let (ch, cw) = (h / 2, w / 2);
    let (r0, c0) = (ch - bh / 2, cw - bw / 2);
    let mut out = src.clone();
    let coeffs = out.coeffs_mut();
    for sr in r0..r0 + bh {
        // centred row `sr` holds frequency row `(sr + h - ch) % h`
        let u = (sr + h - ch) % h;
        for sc in c0..c0 + bw {
            let v = (sc + w - cw) % w;
            let i = u * w + v;
            let amp = style.coeffs()[i].norm();
            let phase = src.coeffs()[i].arg();
            coeffs[i] = Complex64::from_polar(amp, phase);
        }
    }
    Ok(out)
}

/// Fourier-domain style swap, per channel. `style` is resized to `src` first.
pub fn fda_swap(src: &RgbImage, style: &RgbImage, beta: f64) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("fda beta {beta} outside [0, 1]")));
    }
    let (h, w) = src.dims();
    let style = style.resize_bilinear(h, w)?;
    let channels: Vec<GrayMap> = (0..3)
        .map(|c| {
            let swapped = swap_amplitude(&dft2(&src.channel(c)), &dft2(&style.channel(c)), beta)?;
            Ok(idft2(&swapped))
        })
        .collect::<Result<_>>()?;
    RgbImage::from_channels([&channels[0], &channels[1], &channels[2]])
}

/// Augmentation set for the target at `index` in `target_ids`.
///
/// Order is `[Identity, Flip, Scale, Fda]` with disabled kinds omitted; the FDA partner is
/// drawn uniformly from the other targets.
pub fn build_augmentation_set(
    config: &AugConfig,
    target_ids: &[String],
    index: usize,
    seed: u64,
) -> Result<Vec<AugmentationSpec>> {
    config.validate()?;
    if config.count() < 2 {
        return Err(Error::config(
            "augment",
            "at least one augmentation besides identity is required",
        ));
    }
    let mut specs = vec![AugmentationSpec::Identity];
    if config.flip {
        specs.push(AugmentationSpec::Flip);
    }
    if let Some([height, width]) = config.scale {
        specs.push(AugmentationSpec::Scale { height, width });
    }
    if config.fda {
        if index >= target_ids.len() {
            return Err(Error::invalid(format!(
                "target index {index} out of range for {} targets",
                target_ids.len()
            )));
        }
        let style = if target_ids.len() == 1 {
            index
        } else {
            let mut rng = stream(seed, "fda-partner", index as u64);
            let pick = rng.random_range(0..target_ids.len() - 1);
            if pick >= index {
                pick + 1
            } else {
                pick
            }
        };
        specs.push(AugmentationSpec::Fda {
            beta: config.fda_beta,
            style_id: target_ids[style].clone(),
        });
    }
    Ok(specs)
}
