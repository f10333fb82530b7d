use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use salsynth_core::metrics::{confusion, mae_mask, max_f_beta, pr_curve, BETA_SQ, N_THRESHOLDS};
use salsynth_core::{BinaryMask, GrayMap};

use super::{ensure, fail, Check};

const PAIRS: usize = 20;
const TOL: f64 = 1e-12;

/// Per-threshold (tp, fp, fn) by visiting every pixel: positive iff p >= i/255 and p > 0.
pub fn recount(p: &[f64], y: &[u8]) -> Vec<(u64, u64, u64)> {
    (0..N_THRESHOLDS)
        .map(|i| {
            let t = i as f64 / 255.0;
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (&v, &g) in p.iter().zip(y) {
                let hit = v >= t && v > 0.0;
                match (hit, g == 1) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            (tp, fp, fn_)
        })
        .collect()
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>, usize, usize) {
    let (h, w) = (rng.random_range(4..40), rng.random_range(4..40));
    let p = (0..h * w)
        .map(|_| match rng.random_range(0..8) {
            // values sitting exactly on a threshold, and the extremes
            0 => rng.random_range(0..256) as f64 / 255.0,
            1 => 0.0,
            2 => 1.0,
            _ => rng.random(),
        })
        .collect();
    let fg = rng.random_range(0.0..0.6);
    let y = (0..h * w)
        .map(|_| u8::from(rng.random::<f64>() < fg))
        .collect();
    (p, y, h, w)
}

/// MAE, confusion counts, pooled PR curve and max F against a direct recount.
pub fn check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    let mut pooled = vec![(0u64, 0u64, 0u64); N_THRESHOLDS];
    for k in 0..PAIRS {
        let (p, y, h, w) = random_pair(&mut rng);
        let pm = GrayMap::new(h, w, p.clone()).map_err(fail("prediction"))?;
        let ym = BinaryMask::new(h, w, y.clone()).map_err(fail("label"))?;
        let mut abs = 0.0;
        for (a, &b) in p.iter().zip(&y) {
            abs += (a - f64::from(b)).abs();
        }
        let expect_mae = abs / (h * w) as f64;
        let got_mae = mae_mask(&pm, &ym).map_err(fail("mae"))?;
        ensure!(
            (got_mae - expect_mae).abs() <= TOL,
            "pair {k}: mae {got_mae} vs {expect_mae}"
        );
        let c = confusion(&pm, &ym).map_err(fail("confusion"))?;
        let counts = recount(&p, &y);
        for (i, &(tp, fp, fn_)) in counts.iter().enumerate() {
            ensure!(
                (c.tp[i], c.fp[i], c.fn_[i]) == (tp, fp, fn_),
                "pair {k} threshold {i}: counts {:?} vs recount {:?}",
                (c.tp[i], c.fp[i], c.fn_[i]),
                (tp, fp, fn_)
            );
            pooled[i].0 += tp;
            pooled[i].1 += fp;
            pooled[i].2 += fn_;
        }
        preds.push(pm);
        gts.push(ym);
    }
    let curve = pr_curve(&preds, &gts).map_err(fail("pr_curve"))?;
    ensure!(
        curve.len() == N_THRESHOLDS,
        "curve has {} points",
        curve.len()
    );
    let mut best = 0.0f64;
    for (i, (pt, &(tp, fp, fn_))) in curve.iter().zip(&pooled).enumerate() {
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        ensure!(
            (pt.threshold - i as f64 / 255.0).abs() <= TOL,
            "threshold {i} is {}",
            pt.threshold
        );
        ensure!(
            (pt.precision - precision).abs() <= TOL,
            "threshold {i}: precision {} vs {precision}",
            pt.precision
        );
        ensure!(
            (pt.recall - recall).abs() <= TOL,
            "threshold {i}: recall {} vs {recall}",
            pt.recall
        );
        let den = BETA_SQ * precision + recall;
        if den > 0.0 {
            best = best.max((1.0 + BETA_SQ) * precision * recall / den);
        }
    }
    for i in 1..N_THRESHOLDS {
        ensure!(
            curve[i].recall <= curve[i - 1].recall,
            "recall rises at threshold {i}"
        );
    }
    let f = max_f_beta(&curve);
    ensure!((f - best).abs() <= TOL, "max F {f} vs {best}");
    Ok(format!(
        "{PAIRS} pairs, 256 thresholds, counts exact, max F {f:.4}"
    ))
}
