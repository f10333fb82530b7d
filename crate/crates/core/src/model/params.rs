//! Parameter vector of the compact fully-convolutional predictor.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::stream;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl LayerShape {
    fn new(name: &str, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            name: name.into(),
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn bias_len(&self) -> usize {
        self.out_channels
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

/// conv3x3(3→16), conv3x3(16→16), [avg-pool 2x] conv3x3(16→32), [bilinear up 2x]
/// conv3x3(32→16), conv1x1(16→1).
pub fn architecture() -> Vec<LayerShape> {
    vec![
        LayerShape::new("conv1", 3, 16, 3),
        LayerShape::new("conv2", 16, 16, 3),
        LayerShape::new("conv3", 16, 32, 3),
        LayerShape::new("conv4", 32, 16, 3),
        LayerShape::new("conv5", 16, 1, 1),
    ]
}

/// A named slice of the flat parameter vector (one layer's weights or biases).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub range: Range<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorParams {
    layers: Vec<LayerShape>,
    values: Vec<f64>,
}

impl PredictorParams {
    pub fn zeros() -> Self {
        let layers = architecture();
        let n = layers.iter().map(|l| l.weight_len() + l.bias_len()).sum();
        Self {
            layers,
            values: vec![0.0; n],
        }
    }

    /// Weights uniform in `[-a, a]` with `a = sqrt(6 / fan_in)`, biases zero.
    pub fn init(seed: u64) -> Self {
        let mut p = Self::zeros();
        let mut rng = stream(seed, "init", 0);
        for i in 0..p.layers.len() {
            let a = (6.0 / p.layers[i].fan_in() as f64).sqrt();
            let r = p.weight_range(i);
            for v in &mut p.values[r] {
                *v = rng.random_range(-a..=a);
            }
        }
        p
    }

    pub(crate) fn from_parts(layers: Vec<LayerShape>, values: Vec<f64>) -> Option<Self> {
        let expected: usize = layers.iter().map(|l| l.weight_len() + l.bias_len()).sum();
        (layers == architecture() && values.len() == expected).then_some(Self { layers, values })
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn offset(&self, layer: usize) -> usize {
        self.layers[..layer]
            .iter()
            .map(|l| l.weight_len() + l.bias_len())
            .sum()
    }

    pub fn weight_range(&self, layer: usize) -> Range<usize> {
        let o = self.offset(layer);
        o..o + self.layers[layer].weight_len()
    }

    pub fn bias_range(&self, layer: usize) -> Range<usize> {
        let o = self.offset(layer) + self.layers[layer].weight_len();
        o..o + self.layers[layer].bias_len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.values[self.weight_range(layer)]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.values[self.bias_range(layer)]
    }

    /// Weight and bias groups of every layer, in storage order.
    pub fn groups(&self) -> Vec<ParamGroup> {
        (0..self.layers.len())
            .flat_map(|i| {
                let name = &self.layers[i].name;
                [
                    ParamGroup {
                        name: format!("{name}.weight"),
                        range: self.weight_range(i),
                    },
                    ParamGroup {
                        name: format!("{name}.bias"),
                        range: self.bias_range(i),
                    },
                ]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// SHA-256 over the little-endian parameter bytes, hex encoded.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
