//! MAE, precision-recall curve and F-measure.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayMap, ResizeBilinear, RgbImage};
use crate::model::Predictor;
use crate::synth::{DatasetManifest, SplitReader};

pub const N_THRESHOLDS: usize = 256;
pub const BETA_SQ: f64 = 0.3;

/// Threshold `i / 255` for `i` in `0..256`.
pub fn threshold(i: usize) -> f64 {
    i as f64 / 255.0
}

pub fn mae(p: &GrayMap, y: &GrayMap) -> Result<f64> {
    if p.dims() != y.dims() {
        return Err(Error::invalid("mae: dimension mismatch"));
    }
    let sum: f64 = p
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / p.len() as f64)
}

pub fn mae_mask(p: &GrayMap, y: &BinaryMask) -> Result<f64> {
    mae(p, &y.to_gray())
}

/// Integer confusion counts at every threshold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Confusion {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl Confusion {
    fn zeros() -> Self {
        Self {
            tp: vec![0; N_THRESHOLDS],
            fp: vec![0; N_THRESHOLDS],
            fn_: vec![0; N_THRESHOLDS],
        }
    }

    fn add(mut self, other: &Self) -> Self {
        for i in 0..N_THRESHOLDS {
            self.tp[i] += other.tp[i];
            self.fp[i] += other.fp[i];
            self.fn_[i] += other.fn_[i];
        }
        self
    }
}

/// Index of the highest threshold a prediction value clears, or `None` for `p == 0`.
///
/// A pixel counts as positive at threshold `t` when `p >= t` and `p > 0`, so an all-zero map
/// never predicts anything even at `t = 0`.
fn top_level(p: f64) -> Option<usize> {
    if p <= 0.0 {
        return None;
    }
    let mut i = ((p * 255.0).floor() as usize).min(N_THRESHOLDS - 1);
    // guard against floor landing one step low or high through rounding
    while i + 1 < N_THRESHOLDS && p >= threshold(i + 1) {
        i += 1;
    }
    while i > 0 && p < threshold(i) {
        i -= 1;
    }
    Some(i)
}

pub fn confusion(p: &GrayMap, y: &BinaryMask) -> Result<Confusion> {
    if p.dims() != y.dims() {
        return Err(Error::invalid("pr_curve: dimension mismatch"));
    }
    // histogram of top levels split by label, then suffix sums
    let mut pos = vec![0u64; N_THRESHOLDS + 1];
    let mut neg = vec![0u64; N_THRESHOLDS + 1];
    let mut n_pos = 0u64;
    for (&v, &g) in p.values().iter().zip(y.values()) {
        let slot = top_level(v).map_or(N_THRESHOLDS, |i| i);
        if g != 0 {
            pos[slot] += 1;
            n_pos += 1;
        } else {
            neg[slot] += 1;
        }
    }
    let mut c = Confusion::zeros();
    let (mut tp, mut fp) = (0u64, 0u64);
    for i in (0..N_THRESHOLDS).rev() {
        tp += pos[i];
        fp += neg[i];
        c.tp[i] = tp;
        c.fp[i] = fp;
        c.fn_[i] = n_pos - tp;
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

fn points_from(c: &Confusion) -> Vec<PrPoint> {
    (0..N_THRESHOLDS)
        .map(|i| {
            let (tp, fp, fn_) = (c.tp[i] as f64, c.fp[i] as f64, c.fn_[i] as f64);
            let precision = if c.tp[i] + c.fp[i] == 0 {
                1.0
            } else {
                tp / (tp + fp)
            };
            let recall = if c.tp[i] + c.fn_[i] == 0 {
                0.0
            } else {
                tp / (tp + fn_)
            };
            PrPoint {
                threshold: threshold(i),
                precision,
                recall,
            }
        })
        .collect()
}

/// Micro-averaged precision-recall over all pairs at the 256 thresholds.
pub fn pr_curve(preds: &[GrayMap], gts: &[BinaryMask]) -> Result<Vec<PrPoint>> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(Error::invalid(
            "pr_curve: need equally many (>= 1) predictions and labels",
        ));
    }
    let parts = preds
        .iter()
        .zip(gts)
        .map(|(p, y)| confusion(p, y))
        .collect::<Result<Vec<_>>>()?;
    let total = parts.iter().fold(Confusion::zeros(), |a, c| a.add(c));
    Ok(points_from(&total))
}

pub fn f_beta(precision: f64, recall: f64, beta_sq: f64) -> f64 {
    let den = beta_sq * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / den
    }
}

pub fn max_f_beta(points: &[PrPoint]) -> f64 {
    points
        .iter()
        .map(|p| f_beta(p.precision, p.recall, BETA_SQ))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mae: f64,
    pub f_beta: f64,
    pub pr_points: Vec<PrPoint>,
    pub n_images: usize,
}

impl EvalResult {
    pub fn summary_csv(&self) -> String {
        format!(
            "mae,f_beta,n_images\n{},{},{}\n",
            self.mae, self.f_beta, self.n_images
        )
    }

    pub fn pr_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall\n");
        for p in &self.pr_points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.precision, p.recall);
        }
        s
    }

    /// A minimal standalone SVG plot of the PR curve.
    pub fn pr_svg(&self) -> String {
        let (w, h, pad) = (320.0, 320.0, 30.0);
        let sx = |r: f64| pad + r * (w - 2.0 * pad);
        let sy = |p: f64| h - pad - p * (h - 2.0 * pad);
        let path: Vec<String> = self
            .pr_points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.recall), sy(p.precision)))
            .collect();
        format!(
            concat!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">",
                "<rect x=\"{pad}\" y=\"{pad}\" width=\"{iw}\" height=\"{ih}\" fill=\"none\" stroke=\"#888\"/>",
                "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.5\" points=\"{pts}\"/>",
                "<text x=\"{cx}\" y=\"{ty}\" font-size=\"11\" text-anchor=\"middle\">recall</text>",
                "<text x=\"10\" y=\"{cy}\" font-size=\"11\" transform=\"rotate(-90 10 {cy})\" text-anchor=\"middle\">precision</text>",
                "</svg>\n"
            ),
            w = w,
            h = h,
            pad = pad,
            iw = w - 2.0 * pad,
            ih = h - 2.0 * pad,
            pts = path.join(" "),
            cx = w / 2.0,
            ty = h - 8.0,
            cy = h / 2.0,
        )
    }
}

/// An image with its ground truth at native resolution.
#[derive(Clone, Debug)]
pub struct EvalSample {
    pub id: String,
    pub image: RgbImage,
    pub label: BinaryMask,
}

/// Resize to `test_dims`, predict, resize the prediction back to the label's size and score.
/// Dataset MAE is the mean of per-image MAE; PR counts are pooled over all pixels.
pub fn evaluate(
    predictor: &dyn Predictor,
    samples: &[EvalSample],
    test_dims: (usize, usize),
) -> Result<EvalResult> {
    if samples.is_empty() {
        return Err(Error::invalid("evaluate: no samples"));
    }
    let per_image = samples
        .par_iter()
        .map(|s| {
            let input = s.image.resize_bilinear(test_dims.0, test_dims.1)?;
            let pred = predictor.predict(&input).map_err(|e| Error::Predictor {
                target_id: s.id.clone(),
                source: Box::new(e),
            })?;
            let (h, w) = s.label.dims();
            let pred = pred.resize_bilinear(h, w)?;
            Ok((mae_mask(&pred, &s.label)?, confusion(&pred, &s.label)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mae = per_image.iter().map(|(m, _)| m).sum::<f64>() / samples.len() as f64;
    let total = per_image
        .iter()
        .fold(Confusion::zeros(), |a, (_, c)| a.add(c));
    let pr_points = points_from(&total);
    Ok(EvalResult {
        mae,
        f_beta: max_f_beta(&pr_points),
        pr_points,
        n_images: samples.len(),
    })
}

/// Load every entry of `manifest` through `reader` (which must allow label reads).
pub fn load_eval_samples(
    reader: &SplitReader,
    manifest: &DatasetManifest,
    filter: impl Fn(&crate::synth::ManifestEntry) -> bool,
) -> Result<Vec<EvalSample>> {
    manifest
        .entries
        .iter()
        .filter(|e| filter(e))
        .map(|e| {
            Ok(EvalSample {
                id: e.id.clone(),
                image: reader.load_image(e)?,
                label: reader.load_label(e)?,
            })
        })
        .collect()
}
