//! Joint source/target loss, its gradient, and one training round of momentum SGD.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::loss::{bce_grad_logits, bce_mean};
use super::network::{backward_from_logits, forward_planar};
use super::params::PredictorParams;
use super::schedule::one_cycle_lr;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::imaging::{GrayMap, ResizeBilinear, RgbImage};
use crate::rng::stream;
use crate::upl::WeightMap;

/// One training example at predictor input size.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    input: Vec<f64>,
    height: usize,
    width: usize,
    pub label: GrayMap,
    /// `None` means uniform weight 1 (always the case for source samples).
    pub weights: Option<WeightMap>,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        image: &RgbImage,
        label: GrayMap,
        weights: Option<WeightMap>,
    ) -> Result<Self> {
        let (h, w) = image.dims();
        if label.dims() != (h, w) || weights.as_ref().is_some_and(|wm| wm.dims() != (h, w)) {
            return Err(Error::invalid(
                "sample image, label and weights differ in dimensions",
            ));
        }
        Ok(Self {
            id: id.into(),
            input: image.to_planar_unit(),
            height: h,
            width: w,
            label,
            weights,
        })
    }

    /// Resize image and label to `dims` first.
    pub fn resized(
        id: impl Into<String>,
        image: &RgbImage,
        label: &GrayMap,
        dims: (usize, usize),
    ) -> Result<Self> {
        let image = image.resize_bilinear(dims.0, dims.1)?;
        let label = label.resize_bilinear(dims.0, dims.1)?;
        Self::new(id, &image, label, None)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    pub source: f64,
    pub target: f64,
    pub total: f64,
    /// `(source, target)` per batch, for per-epoch reporting.
    pub batches: Vec<(f64, f64)>,
}

fn sample_loss(params: &PredictorParams, s: &Sample) -> Result<f64> {
    let acts = forward_planar(params, &s.input, s.height, s.width)?;
    Ok(bce_mean(
        s.label.values(),
        &acts.prob,
        s.weights.as_ref().map(|w| w.values()),
    ))
}

fn check_batches(source: &[Sample], target: &[Sample]) -> Result<()> {
    if source.is_empty() && target.is_empty() {
        return Err(Error::invalid("both source and target batches are empty"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Source term (unit weights) plus target term (pixel weights), each a mean over samples.
pub fn round_loss(
    params: &PredictorParams,
    source: &[Sample],
    target: &[Sample],
) -> Result<LossReport> {
    check_batches(source, target)?;
    let src: Vec<f64> = source
        .par_iter()
        .map(|s| sample_loss(params, s))
        .collect::<Result<_>>()?;
    let trg: Vec<f64> = target
        .par_iter()
        .map(|s| sample_loss(params, s))
        .collect::<Result<_>>()?;
    let (ls, lt) = (mean(&src), mean(&trg));
    Ok(LossReport {
        source: ls,
        target: lt,
        total: ls + lt,
        batches: vec![(ls, lt)],
    })
}

/// Loss and parameter gradient for one batch.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub loss: LossReport,
    pub grad: Vec<f64>,
}

fn sample_grad(params: &PredictorParams, s: &Sample, scale: f64) -> Result<(f64, Vec<f64>)> {
    let acts = forward_planar(params, &s.input, s.height, s.width)?;
    let weights = s.weights.as_ref().map(|w| w.values());
    let loss = bce_mean(s.label.values(), &acts.prob, weights);
    let dz = bce_grad_logits(s.label.values(), &acts.prob, weights, scale);
    let mut grad = vec![0.0; params.len()];
    backward_from_logits(params, &acts, &dz, &mut grad);
    Ok((loss, grad))
}

/// Analytic gradient of [`round_loss`]. Per-sample work may run in parallel; the
/// reduction is sequential in batch order so results are bit-reproducible.
pub fn backward(
    params: &PredictorParams,
    source: &[Sample],
    target: &[Sample],
) -> Result<Gradient> {
    check_batches(source, target)?;
    let src_scale = if source.is_empty() {
        0.0
    } else {
        1.0 / source.len() as f64
    };
    let trg_scale = if target.is_empty() {
        0.0
    } else {
        1.0 / target.len() as f64
    };
    let jobs: Vec<(&Sample, f64)> = source
        .iter()
        .map(|s| (s, src_scale))
        .chain(target.iter().map(|s| (s, trg_scale)))
        .collect();
    let parts = jobs
        .par_iter()
        .map(|(s, scale)| sample_grad(params, s, *scale))
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; params.len()];
    let (mut ls, mut lt) = (0.0, 0.0);
    for (i, (loss, g)) in parts.iter().enumerate() {
        if i < source.len() {
            ls += loss * src_scale;
        } else {
            lt += loss * trg_scale;
        }
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    for group in params.groups() {
        if grad[group.range.clone()].iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical { layer: group.name });
        }
    }
    Ok(Gradient {
        loss: LossReport {
            source: ls,
            target: lt,
            total: ls + lt,
            batches: vec![(ls, lt)],
        },
        grad,
    })
}

/// SGD with heavy-ball momentum: `v = mu * v + g; theta -= lr * v`.
#[derive(Clone, Debug)]
pub struct Sgd {
    momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(momentum: f64, n: usize) -> Self {
        Self {
            momentum,
            velocity: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut PredictorParams, grad: &[f64], lr: f64) {
        for ((p, v), g) in params
            .values_mut()
            .iter_mut()
            .zip(&mut self.velocity)
            .zip(grad)
        {
            *v = self.momentum * *v + g;
            *p -= lr * *v;
        }
    }
}

/// Scale `grad` down so its L2 norm is at most `max_norm`.
pub fn clip_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Contiguous slice bounds of batch `b` when `n` items are spread over `batches`.
fn share(n: usize, batches: usize, b: usize) -> std::ops::Range<usize> {
    (b * n / batches)..((b + 1) * n / batches)
}

/// Train one round from `prev`: each epoch shuffles both pools and spreads them over the
/// epoch's batches in proportion to pool size.
pub fn train_round(
    prev: &PredictorParams,
    source: &[Sample],
    target: &[Sample],
    config: &TrainConfig,
    round: usize,
) -> Result<(PredictorParams, LossReport)> {
    check_batches(source, target)?;
    let total = source.len() + target.len();
    let n_batches = total.div_ceil(config.batch_size);
    let total_steps = n_batches * config.epochs_per_round;
    let mut params = prev.clone();
    let mut opt = Sgd::new(config.momentum, params.len());
    let mut report = LossReport::default();
    let mut step = 0;
    for epoch in 0..config.epochs_per_round {
        let mut rng = stream(config.seed, "epoch", (round * 10_000 + epoch) as u64);
        let mut src_order: Vec<usize> = (0..source.len()).collect();
        let mut trg_order: Vec<usize> = (0..target.len()).collect();
        src_order.shuffle(&mut rng);
        trg_order.shuffle(&mut rng);
        for b in 0..n_batches {
            let sb: Vec<Sample> = src_order[share(source.len(), n_batches, b)]
                .iter()
                .map(|&i| source[i].clone())
                .collect();
            let tb: Vec<Sample> = trg_order[share(target.len(), n_batches, b)]
                .iter()
                .map(|&i| target[i].clone())
                .collect();
            if sb.is_empty() && tb.is_empty() {
                step += 1;
                continue;
            }
            let mut g = backward(&params, &sb, &tb)?;
            if let Some(max_norm) = config.grad_clip {
                clip_norm(&mut g.grad, max_norm);
            }
            let lr = one_cycle_lr(step, total_steps, config.lr_max)?;
            opt.step(&mut params, &g.grad, lr);
            report.batches.push((g.loss.source, g.loss.target));
            step += 1;
        }
    }
    let n = report.batches.len().max(1) as f64;
    report.source = report.batches.iter().map(|b| b.0).sum::<f64>() / n;
    report.target = report.batches.iter().map(|b| b.1).sum::<f64>() / n;
    report.total = report.source + report.target;
    if !params.is_finite() {
        return Err(Error::Numerical {
            layer: "parameters".into(),
        });
    }
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::RgbImage;

    fn px_sample(id: &str, rgb: [u8; 3], y: f64, w: Option<f64>) -> Sample {
        let img = RgbImage::filled(2, 2, rgb).unwrap();
        let weights = w.map(|v| WeightMap::from_map(GrayMap::filled(2, 2, v).unwrap()).unwrap());
        Sample::new(id, &img, GrayMap::filled(2, 2, y).unwrap(), weights).unwrap()
    }

    #[test]
    fn empty_target_means_source_only() {
        let p = PredictorParams::zeros();
        let s = [px_sample("s", [10, 20, 30], 1.0, None)];
        let r = round_loss(&p, &s, &[]).unwrap();
        assert_eq!(r.target, 0.0);
        assert_eq!(r.total, r.source);
        assert!(round_loss(&p, &[], &[]).is_err());
    }

    #[test]
    fn hand_computed_two_sample_total() {
        // zero parameters predict 0.5 everywhere
        let p = PredictorParams::zeros();
        let s = [px_sample("s", [0, 0, 0], 1.0, None)];
        let t = [px_sample("t", [0, 0, 0], 0.25, Some(0.5))];
        let r = round_loss(&p, &s, &t).unwrap();
        let ln2 = std::f64::consts::LN_2;
        // -(0.25 ln .5 + .75 ln .5) = ln 2, weighted by 0.5
        assert!((r.source - ln2).abs() < 1e-15);
        assert!((r.target - 0.5 * ln2).abs() < 1e-15);
        assert_eq!(r.total, r.source + r.target);
    }

    #[test]
    fn unit_weights_equal_unweighted() {
        let p = PredictorParams::init(2);
        let a = [px_sample("t", [90, 40, 200], 0.7, Some(1.0))];
        let b = [px_sample("t", [90, 40, 200], 0.7, None)];
        let s = [px_sample("s", [1, 2, 3], 0.0, None)];
        assert_eq!(
            round_loss(&p, &s, &a).unwrap().target,
            round_loss(&p, &s, &b).unwrap().target
        );
    }

    #[test]
    fn zero_lr_step_keeps_parameters() {
        let p = PredictorParams::init(5);
        let s = [px_sample("s", [100, 50, 0], 1.0, None)];
        let g = backward(&p, &s, &[]).unwrap();
        let mut q = p.clone();
        Sgd::new(0.9, q.len()).step(&mut q, &g.grad, 0.0);
        assert_eq!(p, q);
    }

    #[test]
    fn shares_cover_pool() {
        for (n, batches) in [(0, 3), (5, 3), (30, 7), (250, 9)] {
            let covered: usize = (0..batches).map(|b| share(n, batches, b).len()).sum();
            assert_eq!(covered, n);
        }
    }
}
