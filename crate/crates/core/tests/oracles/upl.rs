use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use salsynth_core::upl::{reweight, uncertainty_score, variance_map};
use salsynth_core::GrayMap;

use super::{ensure, fail, Check};

const SETS: usize = 50;
const SIDE: usize = 16;
const TOL: f64 = 1e-12;

/// Straight-line per-pixel mean, population variance, mean score and exp(-k v) weights.
pub fn reference(preds: &[Vec<f64>], k: f64) -> (Vec<f64>, f64, Vec<f64>) {
    let n = preds.len() as f64;
    let len = preds[0].len();
    let mut var = Vec::with_capacity(len);
    for i in 0..len {
        let mut sum = 0.0;
        for p in preds {
            sum += p[i];
        }
        let mean = sum / n;
        let mut sq = 0.0;
        for p in preds {
            sq += (p[i] - mean) * (p[i] - mean);
        }
        var.push(sq / n);
    }
    let mut total = 0.0;
    for v in &var {
        total += v;
    }
    let score = total / len as f64;
    let weights = var.iter().map(|v| (-k * v).exp()).collect();
    (var, score, weights)
}

fn random_value(rng: &mut ChaCha8Rng) -> f64 {
    // exact endpoints and mid-values show up alongside generic reals
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        2 => 0.5,
        _ => rng.random(),
    }
}

/// Variance, score and weights on 50 random sets of 2 to 4 maps at 16x16.
pub fn check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for set in 0..SETS {
        let n = rng.random_range(2..=4);
        let k = if set % 2 == 0 {
            20.0
        } else {
            rng.random_range(0.5..50.0)
        };
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..SIDE * SIDE).map(|_| random_value(&mut rng)).collect())
            .collect();
        let maps: Vec<GrayMap> = raw
            .iter()
            .map(|v| GrayMap::new(SIDE, SIDE, v.clone()))
            .collect::<Result<_, _>>()
            .map_err(fail("building maps"))?;
        let v = variance_map(&maps).map_err(fail("variance_map"))?;
        let w = reweight(&v, k).map_err(fail("reweight"))?;
        let s = uncertainty_score(&v);
        let (rv, rs, rw) = reference(&raw, k);
        let dv = v
            .values()
            .iter()
            .zip(&rv)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let dw = w
            .values()
            .iter()
            .zip(&rw)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ds = (s - rs).abs();
        ensure!(dv <= TOL, "set {set} (N={n}): variance differs by {dv:e}");
        ensure!(ds <= TOL, "set {set} (N={n}): score differs by {ds:e}");
        ensure!(
            dw <= TOL,
            "set {set} (N={n}, k={k}): weights differ by {dw:e}"
        );
        worst = worst.max(dv).max(ds).max(dw);
    }
    Ok(format!("{SETS} sets, max abs deviation {worst:.1e}"))
}
