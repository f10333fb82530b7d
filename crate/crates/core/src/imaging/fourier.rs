//! 2D discrete Fourier transform: unnormalized forward, `1/(HW)` inverse.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::GrayMap;

/// Complex coefficients of a 2D transform, row-major, DC at index `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_coeffs(height: usize, width: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), height * width, "spectrum length mismatch");
        Self {
            height,
            width,
            coeffs,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.coeffs[u * self.width + v]
    }
}

fn transform_2d(data: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (
            planner.plan_fft_inverse(width),
            planner.plan_fft_inverse(height),
        )
    } else {
        (
            planner.plan_fft_forward(width),
            planner.plan_fft_forward(height),
        )
    };
    row_fft.process(data);
    let mut column = vec![Complex64::default(); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

pub fn dft2(channel: &GrayMap) -> Spectrum {
    let (h, w) = channel.dims();
    let mut coeffs: Vec<Complex64> = channel
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    transform_2d(&mut coeffs, h, w, false);
    Spectrum::from_coeffs(h, w, coeffs)
}

/// Real part of the inverse transform, before clamping.
pub(crate) fn idft2_raw(spec: &Spectrum) -> Vec<f64> {
    let (h, w) = spec.dims();
    let mut data = spec.coeffs.clone();
    transform_2d(&mut data, h, w, true);
    let norm = 1.0 / (h * w) as f64;
    data.iter().map(|c| c.re * norm).collect()
}

/// Inverse transform; the real part is clamped into `[0, 1]`.
pub fn idft2(spec: &Spectrum) -> GrayMap {
    let (h, w) = spec.dims();
    let values = idft2_raw(spec)
        .into_iter()
        .map(|v| {
            if v.is_finite() {
                v.clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    GrayMap {
        height: h,
        width: w,
        values,
    }
}
