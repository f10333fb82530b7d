//! Forward pass and analytic backward pass of the predictor on planar `[0, 1]` inputs.

use super::params::PredictorParams;
use crate::error::{Error, Result};
use crate::imaging::{taps, GrayMap, RgbImage, Tap};

const CONV1: usize = 0;
const CONV2: usize = 1;
const CONV3: usize = 2;
const CONV4: usize = 3;
const CONV5: usize = 4;

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Activations {
    pub height: usize,
    pub width: usize,
    input: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    pooled: Vec<f64>,
    a3: Vec<f64>,
    up: Vec<f64>,
    a4: Vec<f64>,
    /// Logistic output, one value per pixel.
    pub prob: Vec<f64>,
}

fn check_input(len: usize, h: usize, w: usize) -> Result<()> {
    if h < 2 || w < 2 || !h.is_multiple_of(2) || !w.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "predictor input must have even dimensions >= 2, got {h}x{w}"
        )));
    }
    if len != 3 * h * w {
        return Err(Error::invalid(format!(
            "planar input length {len} does not match 3x{h}x{w}"
        )));
    }
    Ok(())
}

/// Row-major `c = a * b + beta * c` with explicit strides; `a` is `m x k`, `b` is `k x n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfold zero-padded 3x3 neighbourhoods: row `c * 9 + ky * 3 + kx` holds
/// `input[c][y + ky - 1][x + kx - 1]` at column `y * w + x`.
fn im2col(input: &[f64], cin: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut cols = vec![0.0; cin * 9 * hw];
    for c in 0..cin {
        let src = &input[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(c * 9 + ky * 3 + kx) * hw..(c * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                    let drow = &mut row[y * w..(y + 1) * w];
                    match kx {
                        0 => drow[1..].copy_from_slice(&srow[..w - 1]),
                        1 => drow.copy_from_slice(srow),
                        _ => drow[..w - 1].copy_from_slice(&srow[1..]),
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im(cols: &[f64], cin: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; cin * hw];
    for c in 0..cin {
        let dst = &mut out[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(c * 9 + ky * 3 + kx) * hw..(c * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    let grow = &row[y * w..(y + 1) * w];
                    let (d, g) = match kx {
                        0 => (&mut drow[..w - 1], &grow[1..]),
                        1 => (&mut drow[..], grow),
                        _ => (&mut drow[1..], &grow[..w - 1]),
                    };
                    for (a, b) in d.iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conv3x3_forward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
) -> Vec<f64> {
    let hw = h * w;
    let cols = im2col(input, cin, h, w);
    let mut out = vec![0.0; cout * hw];
    for o in 0..cout {
        out[o * hw..(o + 1) * hw].fill(bias[o]);
    }
    gemm(
        cout,
        cin * 9,
        hw,
        weight,
        (cin * 9, 1),
        &cols,
        (hw, 1),
        1.0,
        &mut out,
    );
    out
}

/// Gradients of a 3x3 convolution. Returns the input gradient when `need_input` is set.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    grad_out: &[f64],
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    need_input: bool,
) -> Option<Vec<f64>> {
    let hw = h * w;
    let k = cin * 9;
    for o in 0..cout {
        grad_b[o] += grad_out[o * hw..(o + 1) * hw].iter().sum::<f64>();
    }
    let cols = im2col(input, cin, h, w);
    // dW += G * cols^T
    gemm(cout, hw, k, grad_out, (hw, 1), &cols, (1, hw), 1.0, grad_w);
    if !need_input {
        return None;
    }
    // dcols = W^T * G
    let mut grad_cols = vec![0.0; k * hw];
    gemm(
        k,
        cout,
        hw,
        weight,
        (1, k),
        grad_out,
        (hw, 1),
        0.0,
        &mut grad_cols,
    );
    Some(col2im(&grad_cols, cin, h, w))
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn relu_mask(grad: &mut [f64], activation: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn avg_pool2(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        let src = &input[ch * h * w..];
        let dst = &mut out[ch * h2 * w2..];
        for i in 0..h2 {
            for j in 0..w2 {
                let a = src[2 * i * w + 2 * j] + src[2 * i * w + 2 * j + 1];
                let b = src[(2 * i + 1) * w + 2 * j] + src[(2 * i + 1) * w + 2 * j + 1];
                dst[i * w2 + j] = 0.25 * (a + b);
            }
        }
    }
    out
}

fn avg_pool2_backward(grad: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        let g = &grad[ch * h2 * w2..];
        let dst = &mut out[ch * h * w..];
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = 0.25 * g[(y / 2) * w2 + x / 2];
            }
        }
    }
    out
}

struct Upsampler {
    rows: Vec<Tap>,
    cols: Vec<Tap>,
}

impl Upsampler {
    fn new(h2: usize, w2: usize, h: usize, w: usize) -> Self {
        Self {
            rows: taps(h2, h),
            cols: taps(w2, w),
        }
    }

    fn forward(&self, input: &[f64], c: usize, h2: usize, w2: usize) -> Vec<f64> {
        let (h, w) = (self.rows.len(), self.cols.len());
        let mut tmp = vec![0.0; h2 * w];
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            let src = &input[ch * h2 * w2..(ch + 1) * h2 * w2];
            for i in 0..h2 {
                for (j, t) in self.cols.iter().enumerate() {
                    let a = src[i * w2 + t.lo];
                    let b = src[i * w2 + t.hi];
                    tmp[i * w + j] = a + (b - a) * t.frac;
                }
            }
            let dst = &mut out[ch * h * w..(ch + 1) * h * w];
            for (y, t) in self.rows.iter().enumerate() {
                let (r0, r1) = (
                    &tmp[t.lo * w..(t.lo + 1) * w],
                    &tmp[t.hi * w..(t.hi + 1) * w],
                );
                let d = &mut dst[y * w..(y + 1) * w];
                for x in 0..w {
                    d[x] = r0[x] + (r1[x] - r0[x]) * t.frac;
                }
            }
        }
        out
    }

    fn backward(&self, grad: &[f64], c: usize, h2: usize, w2: usize) -> Vec<f64> {
        let (h, w) = (self.rows.len(), self.cols.len());
        let mut tmp = vec![0.0; h2 * w];
        let mut out = vec![0.0; c * h2 * w2];
        for ch in 0..c {
            tmp.fill(0.0);
            let g = &grad[ch * h * w..(ch + 1) * h * w];
            for (y, t) in self.rows.iter().enumerate() {
                let grow = &g[y * w..(y + 1) * w];
                for x in 0..w {
                    tmp[t.lo * w + x] += (1.0 - t.frac) * grow[x];
                    tmp[t.hi * w + x] += t.frac * grow[x];
                }
            }
            let dst = &mut out[ch * h2 * w2..(ch + 1) * h2 * w2];
            for i in 0..h2 {
                for (j, t) in self.cols.iter().enumerate() {
                    let v = tmp[i * w + j];
                    dst[i * w2 + t.lo] += (1.0 - t.frac) * v;
                    dst[i * w2 + t.hi] += t.frac * v;
                }
            }
        }
        out
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Forward pass on a planar `3 x h x w` input in `[0, 1]`.
pub fn forward_planar(
    params: &PredictorParams,
    input: &[f64],
    h: usize,
    w: usize,
) -> Result<Activations> {
    check_input(input.len(), h, w)?;
    let layers = params.layers();
    let c1 = layers[CONV1].out_channels;
    let c2 = layers[CONV2].out_channels;
    let c3 = layers[CONV3].out_channels;
    let c4 = layers[CONV4].out_channels;
    let (h2, w2) = (h / 2, w / 2);

    let mut a1 = conv3x3_forward(
        input,
        3,
        h,
        w,
        params.weights(CONV1),
        params.bias(CONV1),
        c1,
    );
    relu_in_place(&mut a1);
    let mut a2 = conv3x3_forward(&a1, c1, h, w, params.weights(CONV2), params.bias(CONV2), c2);
    relu_in_place(&mut a2);
    let pooled = avg_pool2(&a2, c2, h, w);
    let mut a3 = conv3x3_forward(
        &pooled,
        c2,
        h2,
        w2,
        params.weights(CONV3),
        params.bias(CONV3),
        c3,
    );
    relu_in_place(&mut a3);
    let up = Upsampler::new(h2, w2, h, w).forward(&a3, c3, h2, w2);
    let mut a4 = conv3x3_forward(&up, c3, h, w, params.weights(CONV4), params.bias(CONV4), c4);
    relu_in_place(&mut a4);

    let hw = h * w;
    let w5 = params.weights(CONV5);
    let mut logits = vec![params.bias(CONV5)[0]; hw];
    for c in 0..c4 {
        let k = w5[c];
        for (z, &a) in logits.iter_mut().zip(&a4[c * hw..(c + 1) * hw]) {
            *z += k * a;
        }
    }
    let prob = logits.into_iter().map(sigmoid).collect();
    Ok(Activations {
        height: h,
        width: w,
        input: input.to_vec(),
        a1,
        a2,
        pooled,
        a3,
        up,
        a4,
        prob,
    })
}

/// Saliency map for an RGB image; output dims equal input dims.
pub fn forward(params: &PredictorParams, image: &RgbImage) -> Result<GrayMap> {
    let (h, w) = image.dims();
    let acts = forward_planar(params, &image.to_planar_unit(), h, w)?;
    // saturated logits round to exactly 0 or 1; keep predictions strictly inside (0, 1)
    let prob = acts
        .prob
        .into_iter()
        .map(|p| p.clamp(f64::EPSILON, 1.0 - f64::EPSILON))
        .collect();
    GrayMap::new(h, w, prob)
}

/// Accumulate parameter gradients into `grad` given the loss gradient w.r.t. the logits.
pub fn backward_from_logits(
    params: &PredictorParams,
    acts: &Activations,
    grad_logits: &[f64],
    grad: &mut [f64],
) {
    let (h, w) = (acts.height, acts.width);
    let (h2, w2) = (h / 2, w / 2);
    let hw = h * w;
    let layers = params.layers();
    let c1 = layers[CONV1].out_channels;
    let c2 = layers[CONV2].out_channels;
    let c3 = layers[CONV3].out_channels;
    let c4 = layers[CONV4].out_channels;

    // conv5 (1x1)
    let w5 = params.weights(CONV5);
    let w5_range = params.weight_range(CONV5);
    let b5_range = params.bias_range(CONV5);
    grad[b5_range.start] += grad_logits.iter().sum::<f64>();
    let mut g4 = vec![0.0; c4 * hw];
    for c in 0..c4 {
        grad[w5_range.start + c] += dot(grad_logits, &acts.a4[c * hw..(c + 1) * hw]);
        let k = w5[c];
        for (g, &d) in g4[c * hw..(c + 1) * hw].iter_mut().zip(grad_logits) {
            *g = k * d;
        }
    }
    relu_mask(&mut g4, &acts.a4);

    let (gw, gb) = split_grad(params, grad, CONV4);
    let g_up = conv3x3_backward(
        &acts.up,
        &g4,
        c3,
        c4,
        h,
        w,
        params.weights(CONV4),
        gw,
        gb,
        true,
    )
    .expect("input gradient requested");
    let mut g3 = Upsampler::new(h2, w2, h, w).backward(&g_up, c3, h2, w2);
    relu_mask(&mut g3, &acts.a3);

    let (gw, gb) = split_grad(params, grad, CONV3);
    let g_pool = conv3x3_backward(
        &acts.pooled,
        &g3,
        c2,
        c3,
        h2,
        w2,
        params.weights(CONV3),
        gw,
        gb,
        true,
    )
    .expect("input gradient requested");
    let mut g2 = avg_pool2_backward(&g_pool, c2, h, w);
    relu_mask(&mut g2, &acts.a2);

    let (gw, gb) = split_grad(params, grad, CONV2);
    let mut g1 = conv3x3_backward(
        &acts.a1,
        &g2,
        c1,
        c2,
        h,
        w,
        params.weights(CONV2),
        gw,
        gb,
        true,
    )
    .expect("input gradient requested");
    relu_mask(&mut g1, &acts.a1);

    let (gw, gb) = split_grad(params, grad, CONV1);
    conv3x3_backward(
        &acts.input,
        &g1,
        3,
        c1,
        h,
        w,
        params.weights(CONV1),
        gw,
        gb,
        false,
    );
}

fn split_grad<'a>(
    params: &PredictorParams,
    grad: &'a mut [f64],
    layer: usize,
) -> (&'a mut [f64], &'a mut [f64]) {
    let wr = params.weight_range(layer);
    let br = params.bias_range(layer);
    debug_assert_eq!(wr.end, br.start);
    let (head, tail) = grad[wr.start..br.end].split_at_mut(wr.len());
    (head, tail)
}
