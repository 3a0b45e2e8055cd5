//! Discrete approximations of `f̂(ω) = ∫ f(t) e^{−iωt} dt` on uniform grids.
//!
//! For samples `f_n = f(nΔt)`, `n = 0..N`, the transform is approximated by
//! `f̂(ω_k) ≈ Δt Σ_n f_n e^{−2πikn/N}` at `ω_k = 2πk/(NΔt)`, with indices
//! `k > N/2` standing for negative frequencies.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::Complex;
use rustfft::{Fft, FftPlanner};

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Angular frequency of DFT bin `k` for `n` samples with step `dt`.
pub fn frequency(k: usize, n: usize, dt: f64) -> f64 {
    let k = k as i64;
    let n_i = n as i64;
    let signed = if k > n_i / 2 { k - n_i } else { k };
    TAU * signed as f64 / (n as f64 * dt)
}

pub fn frequencies(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| frequency(k, n, dt)).collect()
}

/// Transform of real samples.
pub fn forward(samples: &[f64], dt: f64) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x * dt, 0.0)).collect();
    if !buf.is_empty() {
        plan(buf.len(), false).process(&mut buf);
    }
    buf
}

/// Makes a spectrum Hermitian (`F[N−k] = conj F[k]`) by averaging each pair,
/// so that its inverse transform is real.
pub fn hermitian_symmetrize(spectrum: &mut [Complex<f64>]) {
    let n = spectrum.len();
    if n == 0 {
        return;
    }
    spectrum[0].im = 0.0;
    if n.is_multiple_of(2) {
        spectrum[n / 2].im = 0.0;
    }
    for k in 1..n.div_ceil(2) {
        let avg = (spectrum[k] + spectrum[n - k].conj()) * 0.5;
        spectrum[k] = avg;
        spectrum[n - k] = avg.conj();
    }
}

/// Inverse of [`forward`] for a spectrum of a real signal; the spectrum is
/// symmetrized first.
pub fn inverse_real(spectrum: &[Complex<f64>], dt: f64) -> Vec<f64> {
    let n = spectrum.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = spectrum.to_vec();
    hermitian_symmetrize(&mut buf);
    plan(n, true).process(&mut buf);
    let scale = 1.0 / (n as f64 * dt);
    buf.iter().map(|c| c.re * scale).collect()
}

/// Appends zeros up to `factor * samples.len()` entries.
pub fn zero_pad(samples: &[f64], factor: usize) -> Vec<f64> {
    let mut out = samples.to_vec();
    out.resize(samples.len() * factor.max(1), 0.0);
    out
}
