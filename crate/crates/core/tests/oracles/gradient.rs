//! Analytic gradients against central finite differences.
//!
//! The reference is a direct-loop forward pass written here with every rectifier's on/off
//! state frozen at the unperturbed parameters. Around those parameters it agrees with the
//! real network on its smooth piece, so differences stay meaningful when a perturbation
//! would push some unit across zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use salsynth_core::imaging::{GrayMap, RgbImage};
use salsynth_core::model::{backward, round_loss, PredictorParams, Sample};
use salsynth_core::upl::WeightMap;

use super::{ensure, Check};

const STEP: f64 = 1e-3;
const TOLERANCE: f64 = 1e-4;
const PER_GROUP: usize = 40;
const EPS: f64 = 1e-7;

struct Case {
    input: Vec<f64>,
    label: Vec<f64>,
    weights: Option<Vec<f64>>,
}

fn random_case(rng: &mut ChaCha8Rng, n: usize, weighted: bool) -> Case {
    Case {
        input: (0..3 * n * n)
            .map(|_| f64::from(rng.random::<u8>()) / 255.0)
            .collect(),
        label: (0..n * n).map(|_| rng.random::<f64>()).collect(),
        weights: weighted.then(|| (0..n * n).map(|_| rng.random_range(0.05..1.0)).collect()),
    }
}

fn to_sample(c: &Case, id: &str, n: usize) -> Sample {
    let mut rgb = vec![0u8; 3 * n * n];
    for ch in 0..3 {
        for i in 0..n * n {
            rgb[3 * i + ch] = (c.input[ch * n * n + i] * 255.0).round() as u8;
        }
    }
    let img = RgbImage::new(n, n, rgb).unwrap();
    let label = GrayMap::new(n, n, c.label.clone()).unwrap();
    let weights = c
        .weights
        .as_ref()
        .map(|w| WeightMap::from_map(GrayMap::new(n, n, w.clone()).unwrap()).unwrap());
    Sample::new(id, &img, label, weights).unwrap()
}

/// Weight index `[o][c][ky][kx]`, zero padding, stride 1.
#[allow(clippy::too_many_arguments)]
fn conv(
    x: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    wt: &[f64],
    b: &[f64],
    cout: usize,
    k: usize,
) -> Vec<f64> {
    let r = (k / 2) as isize;
    let mut out = vec![0.0; cout * h * w];
    for o in 0..cout {
        for y in 0..h {
            for xx in 0..w {
                let mut s = b[o];
                for c in 0..cin {
                    for ky in 0..k {
                        for kx in 0..k {
                            let (sy, sx) =
                                (y as isize + ky as isize - r, xx as isize + kx as isize - r);
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            s += wt[((o * cin + c) * k + ky) * k + kx]
                                * x[(c * h + sy as usize) * w + sx as usize];
                        }
                    }
                }
                out[(o * h + y) * w + xx] = s;
            }
        }
    }
    out
}

fn pool(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        for y in 0..h2 {
            for xx in 0..w2 {
                let at = |dy: usize, dx: usize| x[(ch * h + 2 * y + dy) * w + 2 * xx + dx];
                out[(ch * h2 + y) * w2 + xx] = (at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1)) / 4.0;
            }
        }
    }
    out
}

/// Half-pixel-centre bilinear doubling with edge clamping.
fn upsample(x: &[f64], c: usize, h2: usize, w2: usize) -> Vec<f64> {
    let coord = |i: usize, src: usize| {
        let s = ((i as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (src - 1) as f64);
        let lo = s.floor() as usize;
        (lo, (lo + 1).min(src - 1), s - lo as f64)
    };
    let (h, w) = (2 * h2, 2 * w2);
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            let (y0, y1, fy) = coord(y, h2);
            for xx in 0..w {
                let (x0, x1, fx) = coord(xx, w2);
                let v = |yy: usize, xv: usize| x[(ch * h2 + yy) * w2 + xv];
                out[(ch * h + y) * w + xx] = (1.0 - fy) * ((1.0 - fx) * v(y0, x0) + fx * v(y0, x1))
                    + fy * ((1.0 - fx) * v(y1, x0) + fx * v(y1, x1));
            }
        }
    }
    out
}

/// Rectify against `mask` when given; otherwise record the live pattern into `record`.
fn gate(z: &mut [f64], mask: Option<&[bool]>, record: &mut Vec<bool>) {
    match mask {
        Some(m) => z
            .iter_mut()
            .zip(m)
            .for_each(|(v, &on)| *v = if on { *v } else { 0.0 }),
        None => z.iter_mut().for_each(|v| {
            record.push(*v > 0.0);
            *v = v.max(0.0);
        }),
    }
}

/// Per-sample loss; `mask` freezes the rectifiers, `None` runs them live and returns the pattern.
fn reference_loss(
    p: &PredictorParams,
    case: &Case,
    n: usize,
    mask: Option<&[bool]>,
) -> (f64, Vec<bool>) {
    let l = p.layers();
    let mut pattern = Vec::new();
    let mut cursor = 0;
    let mut next = |len: usize| {
        let m = mask.map(|m| &m[cursor..cursor + len]);
        cursor += len;
        m
    };
    let mut a1 = conv(
        &case.input,
        3,
        n,
        n,
        p.weights(0),
        p.bias(0),
        l[0].out_channels,
        3,
    );
    let m = next(a1.len());
    gate(&mut a1, m, &mut pattern);
    let mut a2 = conv(
        &a1,
        l[1].in_channels,
        n,
        n,
        p.weights(1),
        p.bias(1),
        l[1].out_channels,
        3,
    );
    let m = next(a2.len());
    gate(&mut a2, m, &mut pattern);
    let pooled = pool(&a2, l[1].out_channels, n, n);
    let mut a3 = conv(
        &pooled,
        l[2].in_channels,
        n / 2,
        n / 2,
        p.weights(2),
        p.bias(2),
        l[2].out_channels,
        3,
    );
    let m = next(a3.len());
    gate(&mut a3, m, &mut pattern);
    let up = upsample(&a3, l[2].out_channels, n / 2, n / 2);
    let mut a4 = conv(
        &up,
        l[3].in_channels,
        n,
        n,
        p.weights(3),
        p.bias(3),
        l[3].out_channels,
        3,
    );
    let m = next(a4.len());
    gate(&mut a4, m, &mut pattern);
    let z = conv(&a4, l[4].in_channels, n, n, p.weights(4), p.bias(4), 1, 1);
    let mut total = 0.0;
    for (i, zi) in z.iter().enumerate() {
        let prob = (1.0 / (1.0 + (-zi).exp())).clamp(EPS, 1.0 - EPS);
        let y = case.label[i];
        let wt = case.weights.as_ref().map_or(1.0, |w| w[i]);
        total -= wt * (y * prob.ln() + (1.0 - y) * (1.0 - prob).ln());
    }
    (total / z.len() as f64, pattern)
}

struct GroupReport {
    name: String,
    rel_err: f64,
}

/// Group-level relative error `||g_fd - g_an|| / ||max(|g_fd|, |g_an|)||` over sampled coordinates.
fn group_errors(seed: u64, n: usize) -> Result<Vec<GroupReport>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = PredictorParams::init(seed);
    // non-zero biases so every path carries gradient
    for g in params.groups() {
        if g.name.ends_with("bias") {
            for v in &mut params.values_mut()[g.range] {
                *v = rng.random_range(-0.1..0.1);
            }
        }
    }
    let src_cases = [
        random_case(&mut rng, n, false),
        random_case(&mut rng, n, false),
    ];
    let trg_cases = [random_case(&mut rng, n, true)];
    let src: Vec<Sample> = src_cases
        .iter()
        .enumerate()
        .map(|(i, c)| to_sample(c, &format!("s{i}"), n))
        .collect();
    let trg: Vec<Sample> = trg_cases
        .iter()
        .enumerate()
        .map(|(i, c)| to_sample(c, &format!("t{i}"), n))
        .collect();

    let masks: Vec<Vec<bool>> = src_cases
        .iter()
        .chain(&trg_cases)
        .map(|c| reference_loss(&params, c, n, None).1)
        .collect();
    let total = |p: &PredictorParams| {
        let l = |cases: &[Case], m: &[Vec<bool>]| {
            cases
                .iter()
                .zip(m)
                .map(|(c, m)| reference_loss(p, c, n, Some(m)).0)
                .sum::<f64>()
                / cases.len() as f64
        };
        l(&src_cases, &masks[..2]) + l(&trg_cases, &masks[2..])
    };

    // the reference must reproduce the library's loss before its differences mean anything
    let lib = round_loss(&params, &src, &trg).unwrap().total;
    let reference = total(&params);
    ensure!(
        (lib - reference).abs() < 1e-12,
        "seed {seed}: loss {lib} vs reference {reference}"
    );

    let analytic = backward(&params, &src, &trg).unwrap().grad;
    let mut out = Vec::new();
    for g in params.groups() {
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for _ in 0..PER_GROUP.min(g.range.len()) {
            let i = rng.random_range(g.range.clone());
            let mut plus = params.clone();
            plus.values_mut()[i] += STEP;
            let mut minus = params.clone();
            minus.values_mut()[i] -= STEP;
            let fd = (total(&plus) - total(&minus)) / (2.0 * STEP);
            diff += (fd - analytic[i]).powi(2);
            norm += fd.powi(2).max(analytic[i].powi(2));
        }
        out.push(GroupReport {
            name: g.name.clone(),
            rel_err: diff.sqrt() / norm.sqrt().max(1e-300),
        });
    }
    Ok(out)
}

/// Every parameter group within 1e-4 relative error on 32x32 batches, three seeds.
pub fn check() -> Check {
    let mut worst = 0.0f64;
    for seed in [1, 2, 3] {
        for r in group_errors(seed, 32)? {
            ensure!(
                r.rel_err < TOLERANCE,
                "seed {seed} group {}: relative error {:e}",
                r.name,
                r.rel_err
            );
            worst = worst.max(r.rel_err);
        }
    }
    Ok(format!(
        "3 seeds x 10 groups, worst relative error {worst:.1e}"
    ))
}
