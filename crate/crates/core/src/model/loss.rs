//! Pixel-weighted binary cross-entropy, normalized by pixel count.

use crate::error::{Error, Result};
use crate::imaging::GrayMap;
use crate::upl::WeightMap;

/// Probabilities are clamped to `[LOG_EPS, 1 - LOG_EPS]` before taking logs.
pub const LOG_EPS: f64 = 1e-7;

/// Mean over pixels of `w * bce(y, p)`; `weights = None` means all ones.
pub(crate) fn bce_mean(y: &[f64], p: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        let pc = p[i].clamp(LOG_EPS, 1.0 - LOG_EPS);
        let l = -(y[i] * pc.ln() + (1.0 - y[i]) * (1.0 - pc).ln());
        total += weights.map_or(1.0, |w| w[i]) * l;
    }
    total / y.len() as f64
}

/// Gradient of `scale * bce_mean` with respect to the logits behind `p = sigmoid(z)`.
/// Pixels whose probability sits in the clamped region contribute nothing.
pub(crate) fn bce_grad_logits(
    y: &[f64],
    p: &[f64],
    weights: Option<&[f64]>,
    scale: f64,
) -> Vec<f64> {
    let norm = scale / y.len() as f64;
    (0..y.len())
        .map(|i| {
            if p[i] <= LOG_EPS || p[i] >= 1.0 - LOG_EPS {
                0.0
            } else {
                norm * weights.map_or(1.0, |w| w[i]) * (p[i] - y[i])
            }
        })
        .collect()
}

pub fn weighted_bce(y: &GrayMap, p: &GrayMap, weights: &WeightMap) -> Result<f64> {
    if y.dims() != p.dims() || y.dims() != weights.dims() {
        return Err(Error::invalid(format!(
            "loss inputs differ in dimensions: label {:?}, prediction {:?}, weights {:?}",
            y.dims(),
            p.dims(),
            weights.dims()
        )));
    }
    Ok(bce_mean(y.values(), p.values(), Some(weights.values())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(v: &[f64]) -> GrayMap {
        GrayMap::new(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_binary_prediction_is_near_zero() {
        let y = g(&[0.0, 1.0, 1.0, 0.0]);
        let l = weighted_bce(&y, &y, &WeightMap::ones(1, 4).unwrap()).unwrap();
        assert!(l <= 2e-7, "{l}");
    }

    #[test]
    fn half_probability_on_positive() {
        let l = weighted_bce(&g(&[1.0]), &g(&[0.5]), &WeightMap::ones(1, 1).unwrap()).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn halving_weights_halves_loss() {
        let y = g(&[0.0, 1.0, 0.3]);
        let p = g(&[0.2, 0.6, 0.9]);
        let w = WeightMap::from_map(g(&[0.8, 0.4, 1.0])).unwrap();
        let half = WeightMap::from_map(g(&[0.4, 0.2, 0.5])).unwrap();
        let a = weighted_bce(&y, &p, &w).unwrap();
        let b = weighted_bce(&y, &p, &half).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
    }

    #[test]
    fn dims_mismatch_rejected() {
        assert!(
            weighted_bce(&g(&[0.0]), &g(&[0.0, 1.0]), &WeightMap::ones(1, 1).unwrap()).is_err()
        );
    }

    #[test]
    fn stationary_at_matching_prediction() {
        let y = [0.3, 0.71, 0.5];
        let grad = bce_grad_logits(&y, &y, None, 1.0);
        assert!(grad.iter().all(|g| g.abs() <= 1e-6));
    }

    proptest! {
        #[test]
        fn non_negative_and_monotone_in_weight(
            y in 0.0f64..=1.0, p in 0.0f64..=1.0, w in 0.01f64..=1.0, dw in 0.0f64..0.5,
        ) {
            let a = bce_mean(&[y], &[p], Some(&[w]));
            let b = bce_mean(&[y], &[p], Some(&[w + dw]));
            prop_assert!(a >= 0.0);
            prop_assert!(b >= a);
        }
    }
}
