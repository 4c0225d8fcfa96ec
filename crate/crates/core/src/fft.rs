//! Two-dimensional FFT on row-major complex fields, built on `rustfft`.
//!
//! The transforms are unitary up to the usual 1/(nx·ny) factor, which is
//! applied on the inverse so that `inverse(forward(f)) == f` to machine
//! precision. Columns are handled by transposing, running row FFTs, and
//! transposing back; plans are cached per instance and shared via `Arc`, so
//! cloning an `Fft2` for another thread is cheap.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    transpose_buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);
        let scratch_len = fwd_x
            .get_inplace_scratch_len()
            .max(inv_x.get_inplace_scratch_len())
            .max(fwd_y.get_inplace_scratch_len())
            .max(inv_y.get_inplace_scratch_len());
        Fft2 {
            nx,
            ny,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            transpose_buf: vec![Complex64::default(); nx * ny],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform of a row-major nx × ny field.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.nx * self.ny);
        self.fwd_x.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.transpose_buf, self.nx, self.ny);
        self.fwd_y
            .process_with_scratch(&mut self.transpose_buf, &mut self.scratch);
        transpose_from(&self.transpose_buf, data, self.ny, self.nx);
    }

    /// Inverse transform including the 1/(nx·ny) normalization.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.nx * self.ny);
        self.inv_x.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.transpose_buf, self.nx, self.ny);
        self.inv_y
            .process_with_scratch(&mut self.transpose_buf, &mut self.scratch);
        transpose_from(&self.transpose_buf, data, self.ny, self.nx);
        let scale = 1.0 / (self.nx as f64 * self.ny as f64);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Angular frequencies for an n-point periodic axis of physical length
/// `length`, in FFT output order: 0, 1, ..., n/2, -(n/2-1), ..., -1 times
/// 2π/length. For even n the Nyquist bin carries +n/2; only its square enters
/// the kinetic multiplier, so the sign convention is immaterial.
pub fn frequencies(n: usize, length: f64) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / length;
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as isize } else { i as isize - n as isize };
            step * m as f64
        })
        .collect()
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], nx: usize, ny: usize) {
    // blocked to keep both access patterns cache-friendly
    const B: usize = 32;
    for iy0 in (0..ny).step_by(B) {
        for ix0 in (0..nx).step_by(B) {
            for iy in iy0..(iy0 + B).min(ny) {
                for ix in ix0..(ix0 + B).min(nx) {
                    dst[ix * ny + iy] = src[iy * nx + ix];
                }
            }
        }
    }
}

fn transpose_from(src: &[Complex64], dst: &mut [Complex64], nx: usize, ny: usize) {
    const B: usize = 32;
    for iy0 in (0..ny).step_by(B) {
        for ix0 in (0..nx).step_by(B) {
            for iy in iy0..(iy0 + B).min(ny) {
                for ix in ix0..(ix0 + B).min(nx) {
                    dst[ix * ny + iy] = src[iy * nx + ix];
                }
            }
        }
    }
}
