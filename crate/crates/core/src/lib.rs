//! Synthetic salient-object data generation and uncertainty-aware pseudo-label
//! domain adaptation for a compact saliency predictor.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod augment;
pub mod config;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synth;
pub mod upl;

pub use error::{Error, Result};
pub use imaging::{BinaryMask, GrayMap, RgbImage, RgbaImage, Spectrum};
