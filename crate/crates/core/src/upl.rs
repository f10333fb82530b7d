//! Uncertainty-aware pseudo-labelling: variance maps over augmented predictions,
//! image-level uncertainty scores, sample selection and pixel reweighting.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{apply, build_augmentation_set, invert, StylePool};
use crate::config::{quota, AugConfig, PseudoConfig};
use crate::error::{Error, Result};
use crate::imaging::{GrayMap, RgbImage};
use crate::model::Predictor;

/// Upper bound of the population variance of values confined to `[0, 1]`.
pub const MAX_VARIANCE: f64 = 0.25;

/// Per-pixel population variance across predictions, in `[0, 0.25]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceMap(GrayMap);

impl VarianceMap {
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Ok(Self(GrayMap::filled(height, width, 0.0)?))
    }

    pub fn from_map(map: GrayMap) -> Result<Self> {
        if map.values().iter().any(|&v| v > MAX_VARIANCE) {
            return Err(Error::invalid("variance above 0.25"));
        }
        Ok(Self(map))
    }

    pub fn map(&self) -> &GrayMap {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
}

/// Per-pixel loss weights in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap(GrayMap);

impl WeightMap {
    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Ok(Self(GrayMap::filled(height, width, 1.0)?))
    }

    pub fn from_map(map: GrayMap) -> Result<Self> {
        if map.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("weights must be strictly positive"));
        }
        Ok(Self(map))
    }

    pub fn map(&self) -> &GrayMap {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabelRecord {
    pub target_id: String,
    pub pseudo_label: GrayMap,
    pub variance: VarianceMap,
    pub score: f64,
    pub weights: WeightMap,
    pub selected: bool,
    pub round: usize,
}

/// JSON sidecar written next to the audit PNGs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSidecar {
    pub target_id: String,
    pub round: usize,
    pub score: f64,
    pub selected: bool,
    pub foreground_fraction: f64,
}

impl PseudoLabelRecord {
    pub fn sidecar(&self) -> PseudoLabelSidecar {
        PseudoLabelSidecar {
            target_id: self.target_id.clone(),
            round: self.round,
            score: self.score,
            selected: self.selected,
            foreground_fraction: foreground_fraction(&self.pseudo_label),
        }
    }
}

/// Pixel-wise population variance (divide by N) of `preds`; `preds[0]` is the pseudo-label.
pub fn variance_map(preds: &[GrayMap]) -> Result<VarianceMap> {
    if preds.len() < 2 {
        return Err(Error::invalid(format!(
            "variance needs at least 2 predictions, got {}",
            preds.len()
        )));
    }
    let dims = preds[0].dims();
    if preds.iter().any(|p| p.dims() != dims) {
        return Err(Error::invalid("predictions differ in dimensions"));
    }
    let n = preds.len() as f64;
    let len = preds[0].len();
    // shift by the first map so identical predictions give exactly zero
    let origin = preds[0].values();
    let mut mean = vec![0.0; len];
    for p in preds {
        for ((m, v), o) in mean.iter_mut().zip(p.values()).zip(origin) {
            *m += v - o;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for p in preds {
        for (((acc, v), m), o) in var.iter_mut().zip(p.values()).zip(&mean).zip(origin) {
            let d = (v - o) - m;
            *acc += d * d;
        }
    }
    let values = var
        .into_iter()
        .map(|s| (s / n).clamp(0.0, MAX_VARIANCE))
        .collect();
    Ok(VarianceMap(GrayMap::new(dims.0, dims.1, values)?))
}

/// Mean variance over all pixels.
pub fn uncertainty_score(v: &VarianceMap) -> f64 {
    v.0.mean()
}

/// `exp(-k * v)` per pixel.
pub fn reweight(v: &VarianceMap, k: f64) -> Result<WeightMap> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("k must be positive, got {k}")));
    }
    let (h, w) = v.dims();
    let values = v.values().iter().map(|&x| (-k * x).exp()).collect();
    Ok(WeightMap(GrayMap::new(h, w, values)?))
}

/// Fraction of pixels at or above 0.5.
pub fn foreground_fraction(label: &GrayMap) -> f64 {
    label.values().iter().filter(|&&v| v >= 0.5).count() as f64 / label.len() as f64
}

/// Drop degenerate pseudo-labels, rank the rest by ascending score (ties by id), and select
/// the first `floor(proportion * records.len())`.
pub fn select_targets(
    records: &mut [PseudoLabelRecord],
    proportion: f64,
    degen_lo: f64,
    degen_hi: f64,
) {
    let n_select = quota(proportion.clamp(0.0, 1.0), records.len());
    let mut candidates: Vec<usize> = (0..records.len())
        .filter(|&i| {
            let f = foreground_fraction(&records[i].pseudo_label);
            f >= degen_lo && f <= degen_hi
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        records[a]
            .score
            .total_cmp(&records[b].score)
            .then_with(|| records[a].target_id.cmp(&records[b].target_id))
    });
    records.iter_mut().for_each(|r| r.selected = false);
    for &i in candidates.iter().take(n_select) {
        records[i].selected = true;
    }
}

/// An unlabeled target image, already at the predictor's input size.
#[derive(Clone, Debug)]
pub struct TargetImage {
    pub id: String,
    pub image: RgbImage,
}

struct TargetPool<'a>(HashMap<&'a str, &'a RgbImage>);

impl StylePool for TargetPool<'_> {
    fn style(&self, id: &str) -> Option<&RgbImage> {
        self.0.get(id).copied()
    }
}

#[derive(Clone, Debug)]
pub struct RefreshOptions<'a> {
    pub augment: &'a AugConfig,
    pub pseudo: &'a PseudoConfig,
    pub k: f64,
    pub proportion: f64,
    pub round: usize,
    pub seed: u64,
}

/// Predict, estimate consistency across augmentations, weight, and select, without touching
/// the predictor's parameters.
pub fn refresh_pseudo_labels(
    predictor: &dyn Predictor,
    targets: &[TargetImage],
    opts: &RefreshOptions<'_>,
) -> Result<Vec<PseudoLabelRecord>> {
    let ids: Vec<String> = targets.iter().map(|t| t.id.clone()).collect();
    let pool = TargetPool(targets.iter().map(|t| (t.id.as_str(), &t.image)).collect());
    let mut records = targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let wrap = |e: Error| Error::Predictor {
                target_id: t.id.clone(),
                source: Box::new(e),
            };
            let dims = t.image.dims();
            let base = predictor.predict(&t.image).map_err(wrap)?;
            let variance = if opts.pseudo.uncertainty {
                let specs = build_augmentation_set(opts.augment, &ids, i, opts.seed)?;
                let mut preds = Vec::with_capacity(specs.len());
                preds.push(base.clone());
                for spec in &specs[1..] {
                    let augmented = apply(spec, &t.image, &pool)?;
                    let pred = predictor.predict(&augmented).map_err(wrap)?;
                    preds.push(invert(spec, &pred, dims)?);
                }
                variance_map(&preds)?
            } else {
                VarianceMap::zeros(dims.0, dims.1)?
            };
            let score = uncertainty_score(&variance);
            let weights = if opts.pseudo.reweight {
                reweight(&variance, opts.k)?
            } else {
                WeightMap::ones(dims.0, dims.1)?
            };
            let pseudo_label = if opts.pseudo.hard_labels {
                base.binarize(0.5).to_gray()
            } else {
                base
            };
            Ok(PseudoLabelRecord {
                target_id: t.id.clone(),
                pseudo_label,
                variance,
                score,
                weights,
                selected: false,
                round: opts.round,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if opts.pseudo.rank_by_uncertainty {
        select_targets(
            &mut records,
            opts.proportion,
            opts.pseudo.degen_lo,
            opts.pseudo.degen_hi,
        );
    } else {
        // no ranking: keep manifest order among non-degenerate candidates
        let n_select = quota(opts.proportion, records.len());
        let mut taken = 0;
        for r in &mut records {
            let f = foreground_fraction(&r.pseudo_label);
            r.selected = taken < n_select && f >= opts.pseudo.degen_lo && f <= opts.pseudo.degen_hi;
            taken += usize::from(r.selected);
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map1(v: &[f64]) -> GrayMap {
        GrayMap::new(1, v.len(), v.to_vec()).unwrap()
    }

    fn record(id: &str, score: f64, fg: f64) -> PseudoLabelRecord {
        PseudoLabelRecord {
            target_id: id.into(),
            pseudo_label: GrayMap::from_fn(10, 10, |y, x| {
                if ((y * 10 + x) as f64) < fg * 100.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .unwrap(),
            variance: VarianceMap::zeros(10, 10).unwrap(),
            score,
            weights: WeightMap::ones(10, 10).unwrap(),
            selected: false,
            round: 1,
        }
    }

    #[test]
    fn identical_predictions_have_zero_variance() {
        let m = map1(&[0.1, 0.7, 0.3]);
        let v = variance_map(&[m.clone(), m.clone(), m]).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn forced_variance_values() {
        let v = variance_map(&[map1(&[0.0]), map1(&[1.0])]).unwrap();
        assert_eq!(v.values(), &[0.25]);
        let v = variance_map(&[map1(&[0.0]), map1(&[0.5]), map1(&[1.0])]).unwrap();
        assert!((v.values()[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn variance_errors() {
        assert!(variance_map(&[map1(&[0.0])]).is_err());
        assert!(variance_map(&[map1(&[0.0]), map1(&[0.0, 1.0])]).is_err());
    }

    #[test]
    fn score_cases() {
        assert_eq!(uncertainty_score(&VarianceMap::zeros(3, 3).unwrap()), 0.0);
        let c = VarianceMap::from_map(GrayMap::filled(4, 2, 0.125).unwrap()).unwrap();
        assert_eq!(uncertainty_score(&c), 0.125);
        let v = VarianceMap::from_map(GrayMap::new(2, 1, vec![0.1, 0.2]).unwrap()).unwrap();
        assert!((uncertainty_score(&v) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn reweight_closed_forms() {
        let v = VarianceMap::from_map(map1(&[0.0, 0.05, 0.25])).unwrap();
        let w = reweight(&v, 20.0).unwrap();
        assert_eq!(w.values()[0], 1.0);
        assert!((w.values()[1] - 0.367_879_441_171_442_3).abs() < 1e-12);
        assert!((w.values()[2] - 0.006_737_946_999_085_467).abs() < 1e-12);
        assert!(reweight(&v, 0.0).is_err());
        assert!(reweight(&v, -1.0).is_err());
    }

    #[test]
    fn selection_by_rank() {
        let mut recs = vec![
            record("a", 0.20, 0.3),
            record("b", 0.01, 0.3),
            record("c", 0.05, 0.3),
        ];
        select_targets(&mut recs, 1.0 / 3.0, 0.01, 0.99);
        let sel: Vec<_> = recs.iter().map(|r| r.selected).collect();
        assert_eq!(sel, [false, true, false]);

        select_targets(&mut recs, 0.0, 0.01, 0.99);
        assert!(recs.iter().all(|r| !r.selected));
        select_targets(&mut recs, 1.0, 0.01, 0.99);
        assert!(recs.iter().all(|r| r.selected));
    }

    #[test]
    fn degenerate_labels_are_dropped_and_quota_underfills() {
        let mut recs = vec![
            record("a", 0.0, 0.0),
            record("b", 0.0, 1.0),
            record("c", 0.1, 0.5),
        ];
        select_targets(&mut recs, 1.0, 0.01, 0.99);
        let sel: Vec<_> = recs.iter().map(|r| r.selected).collect();
        assert_eq!(sel, [false, false, true]);
    }

    #[test]
    fn ties_break_by_id() {
        let mut recs = vec![
            record("z", 0.1, 0.5),
            record("m", 0.1, 0.5),
            record("a", 0.1, 0.5),
        ];
        select_targets(&mut recs, 2.0 / 3.0, 0.01, 0.99);
        let sel: Vec<_> = recs.iter().map(|r| r.selected).collect();
        assert_eq!(sel, [false, true, true]);
    }
}
