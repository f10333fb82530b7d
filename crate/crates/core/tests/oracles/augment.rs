use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use salsynth_core::augment::{apply, fda_swap, invert, swap_amplitude, AugmentationSpec, NoStyles};
use salsynth_core::imaging::{dft2, ResizeBilinear};
use salsynth_core::{GrayMap, RgbImage};

use super::{ensure, fail, Check};

/// Unnormalized forward (sign = -1) or inverse (sign = +1, no 1/N) 2-D DFT by direct summation.
pub fn naive_dft(data: &[Complex64], h: usize, w: usize, sign: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let angle =
                        sign * 2.0 * PI * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                    acc += data[y * w + x] * Complex64::from_polar(1.0, angle);
                }
            }
            out[u * w + v] = acc;
        }
    }
    out
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(v: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, d) in (-r..=r).enumerate() {
                acc += kernel[k] * v[y * w + clamp(x as isize + d, w)];
            }
            tmp[y * w + x] = acc / norm;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, d) in (-r..=r).enumerate() {
                acc += kernel[k] * tmp[clamp(y as isize + d, h) * w + x];
            }
            out[y * w + x] = acc / norm;
        }
    }
    out
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> RgbImage {
    RgbImage::new(h, w, (0..h * w * 3).map(|_| rng.random()).collect()).unwrap()
}

fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize) -> GrayMap {
    GrayMap::new(h, w, (0..h * w).map(|_| rng.random()).collect()).unwrap()
}

fn flip_check(rng: &mut ChaCha8Rng) -> Check {
    for i in 0..100 {
        let (h, w) = (rng.random_range(1..48), rng.random_range(1..48));
        let map = random_map(rng, h, w);
        // a prediction made in the flipped frame of a model that reproduces `map`
        let mirrored: Vec<f64> = (0..h * w)
            .map(|j| map.values()[(j / w) * w + (w - 1 - j % w)])
            .collect();
        let in_frame = GrayMap::new(h, w, mirrored).unwrap();
        let back =
            invert(&AugmentationSpec::Flip, &in_frame, (h, w)).map_err(fail("invert flip"))?;
        ensure!(
            back == map,
            "flip map {i} ({h}x{w}) not restored bit-exactly"
        );
        let img = random_image(rng, h, w);
        let twice = apply(&AugmentationSpec::Flip, &img, &NoStyles)
            .and_then(|f| apply(&AugmentationSpec::Flip, &f, &NoStyles))
            .map_err(fail("apply flip"))?;
        ensure!(twice == img, "flip image {i} not an involution");
    }
    Ok("flip 100/100 bit-exact".into())
}

fn scale_check(rng: &mut ChaCha8Rng) -> Check {
    let spec = AugmentationSpec::Scale {
        height: 224,
        width: 224,
    };
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (h, w) = (rng.random_range(24..96), rng.random_range(24..96));
        let sigma = rng.random_range(2.0..4.0);
        let raw: Vec<f64> = (0..h * w).map(|_| rng.random()).collect();
        let map = GrayMap::new(h, w, gaussian_blur(&raw, h, w, sigma)).unwrap();
        // the prediction in the augmented frame is the map carried into that frame
        let in_frame = map.resize_bilinear(224, 224).map_err(fail("resize"))?;
        let back = invert(&spec, &in_frame, (h, w)).map_err(fail("invert scale"))?;
        ensure!(
            back.dims() == (h, w),
            "scale map {i}: dims {:?}",
            back.dims()
        );
        let err = back
            .values()
            .iter()
            .zip(map.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure!(
            err <= 0.1,
            "scale map {i} ({h}x{w}, sigma {sigma:.2}): L-inf {err}"
        );
        worst = worst.max(err);
    }
    Ok(format!("scale max L-inf {worst:.4}"))
}

fn self_swap_check(rng: &mut ChaCha8Rng) -> Check {
    for i in 0..20 {
        let (h, w) = (rng.random_range(8..48), rng.random_range(8..48));
        let img = random_image(rng, h, w);
        for beta in [0.0, 0.05, 0.3, 1.0] {
            let out = fda_swap(&img, &img, beta).map_err(fail("fda_swap"))?;
            let err = out
                .as_raw()
                .iter()
                .zip(img.as_raw())
                .map(|(&a, &b)| a.abs_diff(b))
                .max()
                .unwrap_or(0);
            ensure!(
                err <= 1,
                "self-swap image {i} beta {beta}: {err} levels off"
            );
        }
    }
    Ok("fda self-swap within 1/255".into())
}

fn beta_one_check(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for (h, w) in [(12, 10), (9, 16), (8, 8), (7, 5)] {
        let src = random_image(rng, h, w);
        let style = random_image(rng, h, w);
        for c in 0..3 {
            let as_complex = |img: &RgbImage| -> Vec<Complex64> {
                img.as_raw()
                    .iter()
                    .skip(c)
                    .step_by(3)
                    .map(|&v| Complex64::new(f64::from(v) / 255.0, 0.0))
                    .collect()
            };
            let fs = naive_dft(&as_complex(&src), h, w, -1.0);
            let ft = naive_dft(&as_complex(&style), h, w, -1.0);
            let expected: Vec<Complex64> = fs
                .iter()
                .zip(&ft)
                .map(|(s, t)| Complex64::from_polar(t.norm(), s.arg()))
                .collect();
            let swapped = swap_amplitude(&dft2(&src.channel(c)), &dft2(&style.channel(c)), 1.0)
                .map_err(fail("swap_amplitude"))?;
            for (i, (got, want)) in swapped.coeffs().iter().zip(&expected).enumerate() {
                let rel = (got - want).norm() / want.norm().max(1e-12);
                ensure!(
                    rel <= 1e-6,
                    "{h}x{w} channel {c} coeff {i}: relative error {rel:e}"
                );
                ensure!(
                    (got.norm() - ft[i].norm()).abs() <= 1e-6 * ft[i].norm().max(1e-12),
                    "{h}x{w} channel {c} coeff {i}: amplitude is not the style's"
                );
                worst = worst.max(rel);
            }
            // the image-domain result is the quantized inverse of that spectrum
            let spatial = naive_dft(&expected, h, w, 1.0);
            let out = fda_swap(&src, &style, 1.0).map_err(fail("fda_swap"))?;
            for (i, z) in spatial.iter().enumerate() {
                let want = ((z.re / (h * w) as f64).clamp(0.0, 1.0) * 255.0).round() as u8;
                let got = out.as_raw()[3 * i + c];
                ensure!(
                    got.abs_diff(want) <= 1,
                    "{h}x{w} channel {c} pixel {i}: {got} vs {want}"
                );
            }
        }
    }
    Ok(format!(
        "fda beta=1 max relative spectrum error {worst:.1e}"
    ))
}

/// Flip, scale and FDA reversal properties.
pub fn check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = [
        flip_check(&mut rng)?,
        scale_check(&mut rng)?,
        self_swap_check(&mut rng)?,
        beta_one_check(&mut rng)?,
    ];
    Ok(parts.join("; "))
}
