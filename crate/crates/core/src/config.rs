//! Declarative configuration shared by the library and the command-line front-end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-round sampling proportions for source and target pools.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundSchedule {
    pub rounds: usize,
    pub source_props: Vec<f64>,
    pub target_props: Vec<f64>,
}

impl Default for RoundSchedule {
    fn default() -> Self {
        Self {
            rounds: 6,
            source_props: vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125],
            target_props: vec![0.0, 0.1, 0.2, 0.4, 0.6, 0.6],
        }
    }
}

impl RoundSchedule {
    /// Single round on the full source set with no target samples.
    pub fn source_only() -> Self {
        Self {
            rounds: 1,
            source_props: vec![1.0],
            target_props: vec![0.0],
        }
    }

    /// Same source schedule as the default, but every pseudo-label is admitted after round one.
    pub fn vanilla() -> Self {
        let base = Self::default();
        let target_props = (0..base.rounds)
            .map(|i| if i == 0 { 0.0 } else { 1.0 })
            .collect();
        Self {
            target_props,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("schedule.rounds", "must be at least 1"));
        }
        for (name, props) in [
            ("schedule.source_props", &self.source_props),
            ("schedule.target_props", &self.target_props),
        ] {
            if props.len() != self.rounds {
                return Err(Error::config(
                    name,
                    format!("has {} entries, expected {}", props.len(), self.rounds),
                ));
            }
            if let Some(p) = props.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::config(
                    name,
                    format!("proportion {p} outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }
}

/// `floor(proportion * n)`, tolerant of representation error in the proportion.
pub fn quota(proportion: f64, n: usize) -> usize {
    ((proportion * n as f64) + 1e-9).floor().max(0.0) as usize
}

/// Which augmentations enter the uncertainty estimate (Identity is always first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugConfig {
    pub flip: bool,
    /// Target size of the rescale augmentation; `None` disables it.
    pub scale: Option<[usize; 2]>,
    pub fda: bool,
    pub fda_beta: f64,
}

impl Default for AugConfig {
    fn default() -> Self {
        Self {
            flip: true,
            scale: Some([224, 224]),
            fda: true,
            fda_beta: 0.05,
        }
    }
}

impl AugConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some([h, w]) = self.scale {
            if h == 0 || w == 0 {
                return Err(Error::config(
                    "augment.scale",
                    "dimensions must be at least 1",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.fda_beta) {
            return Err(Error::config("augment.fda_beta", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        1 + usize::from(self.flip) + usize::from(self.scale.is_some()) + usize::from(self.fda)
    }
}

/// How pseudo-labels are estimated, filtered and weighted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoConfig {
    /// Estimate per-pixel variance across augmentations. When off, variance is zero.
    pub uncertainty: bool,
    /// Use `exp(-k * variance)` pixel weights; when off every weight is 1.
    pub reweight: bool,
    /// Rank by uncertainty score before admitting targets.
    pub rank_by_uncertainty: bool,
    pub degen_lo: f64,
    pub degen_hi: f64,
    /// Binarize pseudo-labels at 0.5 instead of keeping the soft prediction.
    pub hard_labels: bool,
}

impl Default for PseudoConfig {
    fn default() -> Self {
        Self {
            uncertainty: true,
            reweight: true,
            rank_by_uncertainty: true,
            degen_lo: 0.01,
            degen_hi: 0.99,
            hard_labels: false,
        }
    }
}

impl PseudoConfig {
    /// Every pseudo-label at uniform weight.
    pub fn vanilla() -> Self {
        Self {
            uncertainty: false,
            reweight: false,
            rank_by_uncertainty: false,
            degen_lo: 0.0,
            degen_hi: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.degen_lo) || !(0.0..=1.0).contains(&self.degen_hi) {
            return Err(Error::config(
                "pseudo.degen_lo",
                "degeneracy bounds must lie in [0, 1]",
            ));
        }
        if self.degen_lo > self.degen_hi {
            return Err(Error::config("pseudo.degen_hi", "must be >= degen_lo"));
        }
        if self.reweight && !self.uncertainty {
            return Err(Error::config(
                "pseudo.reweight",
                "requires pseudo.uncertainty",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub schedule: RoundSchedule,
    pub batch_size: usize,
    pub train_input_dims: [usize; 2],
    pub test_input_dims: [usize; 2],
    pub lr_max: f64,
    pub momentum: f64,
    pub k: f64,
    pub epochs_per_round: usize,
    /// Rescale each batch gradient to at most this global L2 norm.
    pub grad_clip: Option<f64>,
    pub seed: u64,
    pub augment: AugConfig,
    pub pseudo: PseudoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: RoundSchedule::default(),
            batch_size: 32,
            train_input_dims: [64, 64],
            test_input_dims: [64, 64],
            lr_max: 0.05,
            momentum: 0.9,
            k: 20.0,
            epochs_per_round: 20,
            grad_clip: None,
            seed: 0,
            augment: AugConfig::default(),
            pseudo: PseudoConfig::default(),
        }
    }
}

fn check_even_dims(field: &str, dims: [usize; 2]) -> Result<()> {
    if dims.iter().any(|&d| d < 2 || d % 2 != 0) {
        return Err(Error::config(
            field,
            format!("{}x{} must be even and at least 2", dims[0], dims[1]),
        ));
    }
    Ok(())
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.augment.validate()?;
        self.pseudo.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be at least 1"));
        }
        check_even_dims("train.train_input_dims", self.train_input_dims)?;
        check_even_dims("train.test_input_dims", self.test_input_dims)?;
        if let Some(dims) = self.augment.scale {
            check_even_dims("augment.scale", dims)?;
        }
        if !(self.lr_max > 0.0) || !self.lr_max.is_finite() {
            return Err(Error::config("train.lr_max", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("train.momentum", "must lie in [0, 1)"));
        }
        if !(self.k > 0.0) {
            return Err(Error::config("train.k", "must be positive"));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::config("train.grad_clip", "must be positive"));
        }
        if self.epochs_per_round == 0 {
            return Err(Error::config(
                "train.epochs_per_round",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Photometric shift applied to fresh composites to simulate the target domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    /// Gamma sampled uniformly from this range.
    pub gamma: [f64; 2],
    /// Per-channel multiplicative gain sampled uniformly from this range.
    pub color_scale: [f64; 2],
    /// Standard deviation of additive Gaussian noise, in `[0, 1]` intensity units.
    pub noise_sigma: f64,
    /// Box-blur radius in pixels; 0 disables blurring.
    pub blur_radius: usize,
    /// Probability that a given image is blurred.
    pub blur_prob: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            gamma: [0.5, 0.8],
            color_scale: [0.6, 1.4],
            noise_sigma: 0.08,
            blur_radius: 1,
            blur_prob: 0.5,
        }
    }
}

impl ShiftConfig {
    pub fn identity() -> Self {
        Self {
            gamma: [1.0, 1.0],
            color_scale: [1.0, 1.0],
            noise_sigma: 0.0,
            blur_radius: 0,
            blur_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma[0] > 0.0 && self.gamma[0] <= self.gamma[1]) {
            return Err(Error::config("shift.gamma", "need 0 < lo <= hi"));
        }
        if !(self.color_scale[0] >= 0.0 && self.color_scale[0] <= self.color_scale[1]) {
            return Err(Error::config("shift.color_scale", "need 0 <= lo <= hi"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::config("shift.noise_sigma", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.blur_prob) {
            return Err(Error::config("shift.blur_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }
}
