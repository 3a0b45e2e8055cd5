//! The causal band-pass pulse and its dyadic dilations.
//!
//! The base pulse is `h = c · d³/dt³ [w(t) g(t)]` with a Gaussian
//! `g(t) = exp(−(t − t₀)² / 2s²)` and a C^∞ window `w` that rises from 0 to 1
//! on `[0, a]` and falls back to 0 on `[T − a, T]`. Differentiating the
//! windowed Gaussian (instead of windowing the derivative) keeps the pulse
//! supported in `[0, T]` and makes `∫h`, `∫t h` and `∫t² h` vanish exactly.
//! The constant `c` normalizes `‖h‖_{L²}` to one.
//!
//! At scale `j` the pulse is `h_j(t) = 2^{j/2} h(2^j t)`, sampled with the
//! same number `N` of points on `[0, 2^{−j} T]`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;

/// Degree-3 Taylor expansion `Σ c_k (t − t*)^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet([f64; 4]);

impl Jet {
    fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0])
    }

    fn linear(value: f64, slope: f64) -> Self {
        Jet([value, slope, 0.0, 0.0])
    }

    fn exp(self) -> Self {
        let a = self.0;
        let mut e = [a[0].exp(), 0.0, 0.0, 0.0];
        for k in 1..4 {
            e[k] = (1..=k).map(|i| i as f64 * a[i] * e[k - i]).sum::<f64>() / k as f64;
        }
        Jet(e)
    }

    fn recip(self) -> Self {
        let a = self.0;
        let mut r = [1.0 / a[0], 0.0, 0.0, 0.0];
        for k in 1..4 {
            r[k] = -(1..=k).map(|i| a[i] * r[k - i]).sum::<f64>() / a[0];
        }
        Jet(r)
    }

    /// k-th derivative at the expansion point.
    fn derivative(self, k: usize) -> f64 {
        self.0[k] * [1.0, 1.0, 2.0, 6.0][k]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|c| -c))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| (0..=k).map(|i| self.0[i] * o.0[k - i]).sum()))
    }
}

/// `exp(−1/x)` for `x > 0`, zero otherwise.
fn flat(x: Jet) -> Jet {
    if x.0[0] < 1.0 / 700.0 {
        Jet::constant(0.0)
    } else {
        (-x.recip()).exp()
    }
}

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
fn smooth_step(x: Jet) -> Jet {
    let x0 = x.0[0];
    if x0 <= 0.0 {
        Jet::constant(0.0)
    } else if x0 >= 1.0 {
        Jet::constant(1.0)
    } else {
        let a = flat(x);
        let b = flat(Jet::constant(1.0) - x);
        a * (a + b).recip()
    }
}

/// Shape parameters of the base pulse, as fractions of its duration `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    /// Gaussian center `t₀ / T`.
    pub center: f64,
    /// Gaussian width `s / T`.
    pub width: f64,
    /// Window ramp length `a / T`.
    pub ramp: f64,
}

impl Default for PulseShape {
    fn default() -> Self {
        Self {
            center: 0.4,
            width: 0.05,
            ramp: 0.05,
        }
    }
}

impl PulseShape {
    /// Unnormalized base pulse `d³/dt³ [w g]` at time `t` for duration `T`.
    fn raw(&self, t: f64, duration: f64) -> f64 {
        if t <= 0.0 || t >= duration {
            return 0.0;
        }
        let (t0, s, a) = (self.center * duration, self.width * duration, self.ramp * duration);
        let d = t - t0;
        let g = Jet([-d * d / (2.0 * s * s), -d / (s * s), -1.0 / (2.0 * s * s), 0.0]).exp();
        let rise = smooth_step(Jet::linear(t / a, 1.0 / a));
        let fall = smooth_step(Jet::linear((duration - t) / a, -1.0 / a));
        (rise * fall * g).derivative(3)
    }
}

/// A sampled pulse at dyadic scale `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub scale: i32,
    /// Duration `T` of the scale-0 pulse.
    pub base_duration: f64,
    pub shape: PulseShape,
    /// Normalization constant of the scale-0 pulse times any user gain.
    pub amplitude: f64,
    /// `h_j(nΔt_j)` for `n = 0..N`.
    pub samples: Vec<f64>,
    /// `ĥ_j(ω_k)` on the DFT grid `ω_k = 2πk / (2^{−j} T)`.
    pub spectrum: Vec<Complex<f64>>,
}

/// Base pulse (scale 0) of duration `T` with `N` samples and the default shape.
pub fn base_pulse(duration: f64, samples: usize) -> Result<Pulse> {
    base_pulse_with_shape(duration, samples, PulseShape::default())
}

pub fn base_pulse_with_shape(duration: f64, samples: usize, shape: PulseShape) -> Result<Pulse> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pulse duration must be positive, got {duration}"
        )));
    }
    if samples < 64 || !samples.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "sample count must be a power of two ≥ 64, got {samples}"
        )));
    }
    let dt = duration / samples as f64;
    let raw: Vec<f64> = (0..samples).map(|n| shape.raw(n as f64 * dt, duration)).collect();
    let energy = dt * raw.iter().map(|x| x * x).sum::<f64>();
    let amplitude = 1.0 / energy.sqrt();
    Ok(Pulse::from_samples(
        0,
        duration,
        shape,
        amplitude,
        raw.iter().map(|x| x * amplitude).collect(),
    ))
}

impl Pulse {
    fn from_samples(scale: i32, base_duration: f64, shape: PulseShape, amplitude: f64, samples: Vec<f64>) -> Self {
        let dt = base_duration * 2f64.powi(-scale) / samples.len() as f64;
        let spectrum = fourier::forward(&samples, dt);
        Self {
            scale,
            base_duration,
            shape,
            amplitude,
            samples,
            spectrum,
        }
    }

    /// `h_j(t) = 2^{j/2} h(2^j t)` for a scale-0 pulse.
    pub fn dilate(&self, j: i32) -> Result<Pulse> {
        if self.scale != 0 {
            return Err(Error::InvalidArgument(format!(
                "dilation expects a scale-0 pulse, got scale {}",
                self.scale
            )));
        }
        if j == 0 {
            return Ok(self.clone());
        }
        let gain = 2f64.powf(j as f64 / 2.0);
        Ok(Pulse::from_samples(
            j,
            self.base_duration,
            self.shape,
            self.amplitude,
            self.samples.iter().map(|x| x * gain).collect(),
        ))
    }

    /// The same pulse multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Pulse {
        Pulse::from_samples(
            self.scale,
            self.base_duration,
            self.shape,
            self.amplitude * c,
            self.samples.iter().map(|x| x * c).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Acquisition window `2^{−j} T`.
    pub fn duration(&self) -> f64 {
        self.base_duration * 2f64.powi(-self.scale)
    }

    pub fn dt(&self) -> f64 {
        self.duration() / self.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.len()).map(|n| n as f64 * dt).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        fourier::frequencies(self.len(), self.dt())
    }

    /// Evaluates `h_j(t)` from the analytic formula.
    pub fn value_at(&self, t: f64) -> f64 {
        let dilation = 2f64.powi(self.scale);
        self.amplitude * dilation.sqrt() * self.shape.raw(dilation * t, self.base_duration)
    }

    /// `∫ h_j² dt` by the rectangle rule on the sample grid.
    pub fn energy(&self) -> f64 {
        self.dt() * self.samples.iter().map(|x| x * x).sum::<f64>()
    }

    /// Transform of the pulse zero-padded to `factor * N` samples.
    pub fn padded_spectrum(&self, factor: usize) -> Vec<Complex<f64>> {
        fourier::forward(&fourier::zero_pad(&self.samples, factor), self.dt())
    }

    /// Identifies every setting that affects the sampled pulse at any scale.
    pub fn settings_key(&self) -> String {
        format!(
            "T={:e};N={};center={:e};width={:e};ramp={:e};amplitude={:e}",
            self.base_duration,
            self.len(),
            self.shape.center,
            self.shape.width,
            self.shape.ramp,
            self.amplitude
        )
    }
}

/// Index of the largest `|ĥ|` among non-negative frequencies.
pub fn peak_bin(spectrum: &[Complex<f64>]) -> usize {
    (0..=spectrum.len() / 2)
        .max_by(|&a, &b| spectrum[a].norm().total_cmp(&spectrum[b].norm()))
        .unwrap_or(0)
}
