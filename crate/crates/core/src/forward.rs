//! Time-domain simulation of multi-static response data.
//!
//! The density solves `(λ I − K*)φ + α ∂_t (½ I − K*)φ = (1 + α ∂_t) ∂U/∂ν`
//! with `φ(0) = 0`. Backward differences in time give
//!
//! `(λ̃ I − K*) φ^n = b^n + α/(Δt + α) ((½ I − K*) φ^{n−1} − b^{n−1})`,
//!
//! `λ̃ = (ε/Δt + σ + 1) / (2 (ε/Δt + σ − 1))`, and the data are
//! `V_sr(nΔt) = S[φ_s^n](x_r)`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionConfig, AcquisitionSpec, DipoleSource};
use crate::error::{Error, Result};
use crate::exec;
use crate::fourier;
use crate::geometry::{BoundaryMesh, Material};
use crate::gpt::{deflated_np, remove_weighted_mean, PADDING, SPECTRUM_CUTOFF};
use crate::linalg::ShiftedSolver;
use crate::potentials::{assemble_neumann_poincare, single_layer_evaluator};
use crate::pulse::Pulse;

/// Sources per block in the batched recursion.
const SOURCE_BLOCK: usize = 16;

/// Densities `φ^n`, `n = 0..N`, of one source on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistory {
    pub dt: f64,
    /// Column `n` holds `φ^n`.
    pub steps: DMatrix<f64>,
}

impl DensityHistory {
    pub fn len(&self) -> usize {
        self.steps.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.ncols() == 0
    }

    pub fn step(&self, n: usize) -> DVector<f64> {
        self.steps.column(n).into_owned()
    }
}

/// Simulated (possibly noisy) data for one pulse scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSRDataset {
    pub scale: i32,
    pub ns: usize,
    pub nr: usize,
    /// Base pulse duration `T`.
    pub duration: f64,
    pub dt: f64,
    /// Noise level as a fraction of the per-entry RMS (1.0 = 100%).
    pub noise_level: f64,
    pub seed: Option<u64>,
    pub acquisition: AcquisitionSpec,
    /// Row `s · N_r + r`, column `n`.
    pub data: DMatrix<f64>,
}

impl MSRDataset {
    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn value(&self, s: usize, r: usize, n: usize) -> f64 {
        self.data[(s * self.nr + r, n)]
    }

    /// The `N_s × N_r` matrix at sample `n`.
    pub fn snapshot(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.ns, self.nr, |s, r| self.value(s, r, n))
    }

    /// `((1/(N_s N_r)) (1/T_j) ∫ ‖V(t)‖_F² dt)^{1/2}` by the rectangle rule.
    pub fn rms(&self) -> f64 {
        (self.data.norm_squared() / self.data.len() as f64).sqrt()
    }
}

/// Coefficients of the recursion `φ^n = c P φ^{n−1} + (h_n − c h_{n−1}) G`.
struct Stepper {
    c: f64,
    /// `(λ̃ I − K*)^{-1} (½ I − K*)`
    propagator: DMatrix<f64>,
    /// `(λ̃ I − K*)^{-1}` applied to the sources' normal derivatives.
    response: DMatrix<f64>,
}

fn implicit_shift(material: &Material, dt: f64) -> f64 {
    let r = material.epsilon / dt;
    (r + material.sigma + 1.0) / (2.0 * (r + material.sigma - 1.0))
}

/// Normal derivatives of the sources' static fields, one column per source,
/// projected onto weighted-mean-zero densities.
fn source_terms(mesh: &BoundaryMesh, sources: &[DipoleSource]) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(mesh.len(), sources.len());
    for (s, src) in sources.iter().enumerate() {
        let mut b = src.normal_derivative(mesh);
        remove_weighted_mean(&mesh.weights, &mut b);
        f.set_column(s, &b);
    }
    f
}

impl Stepper {
    fn new(mesh: &BoundaryMesh, material: &Material, dt: f64, f: &DMatrix<f64>) -> Result<Self> {
        material.validate()?;
        let m = mesh.len();
        let k = assemble_neumann_poincare(mesh)?.matrix;
        let shift = implicit_shift(material, dt);
        let a = DMatrix::identity(m, m) * shift - &k;
        let b = DMatrix::identity(m, m) * 0.5 - &k;
        let lu = a.lu();
        let singular = || Error::SingularSystem(format!("λ̃ I − K* is singular at λ̃ = {shift}"));
        let propagator = lu.solve(&b).ok_or_else(singular)?;
        let response = lu.solve(f).ok_or_else(singular)?;
        let alpha = material.alpha();
        Ok(Self {
            c: alpha / (dt + alpha),
            propagator,
            response,
        })
    }

    /// Runs the recursion for the source columns `cols` and returns
    /// `E φ^n` for every `n` as a list of `rows(E) × cols.len()` blocks.
    fn run(&self, h: &[f64], cols: std::ops::Range<usize>, e: Option<&DMatrix<f64>>) -> Vec<DMatrix<f64>> {
        let g = self.response.columns(cols.start, cols.len()).into_owned();
        let mut phi = DMatrix::zeros(g.nrows(), g.ncols());
        let mut next = phi.clone();
        let observe = |phi: &DMatrix<f64>| match e {
            Some(e) => e * phi,
            None => phi.clone(),
        };
        let mut out = Vec::with_capacity(h.len());
        out.push(observe(&phi));
        for n in 1..h.len() {
            next.gemm(self.c, &self.propagator, &phi, 0.0);
            let drive = h[n] - self.c * h[n - 1];
            next.zip_apply(&g, |x, gi| *x += drive * gi);
            std::mem::swap(&mut phi, &mut next);
            out.push(observe(&phi));
        }
        out
    }
}

/// Density history of one source, `φ^0 = 0`.
pub fn solve_density(
    mesh: &BoundaryMesh,
    material: &Material,
    source: &DipoleSource,
    pulse: &Pulse,
) -> Result<DensityHistory> {
    let f = source_terms(mesh, std::slice::from_ref(source));
    let stepper = Stepper::new(mesh, material, pulse.dt(), &f)?;
    let blocks = stepper.run(&pulse.samples, 0..1, None);
    let steps = DMatrix::from_fn(mesh.len(), blocks.len(), |i, n| blocks[n][(i, 0)]);
    Ok(DensityHistory { dt: pulse.dt(), steps })
}

fn check_setup(mesh: &BoundaryMesh, material: &Material, config: &AcquisitionConfig) -> Result<()> {
    mesh.validate()?;
    material.validate()?;
    config.check_clearance(mesh)
}

fn dataset(config: &AcquisitionConfig, pulse: &Pulse, data: DMatrix<f64>) -> MSRDataset {
    MSRDataset {
        scale: pulse.scale,
        ns: config.ns(),
        nr: config.nr(),
        duration: pulse.base_duration,
        dt: pulse.dt(),
        noise_level: 0.0,
        seed: None,
        acquisition: config.spec,
        data,
    }
}

/// Time-stepping simulation of `V_sr(nΔt_j)` for every source and receiver.
pub fn simulate_msr(
    mesh: &BoundaryMesh,
    material: &Material,
    config: &AcquisitionConfig,
    pulse: &Pulse,
) -> Result<MSRDataset> {
    check_setup(mesh, material, config)?;
    let f = source_terms(mesh, &config.sources);
    let stepper = Stepper::new(mesh, material, pulse.dt(), &f)?;
    let e = single_layer_evaluator(mesh, &config.receivers)?;
    let (ns, nr) = (config.ns(), config.nr());
    let blocks = ns.div_ceil(SOURCE_BLOCK);
    let results = exec::map_indexed(blocks, |b| {
        let start = b * SOURCE_BLOCK;
        let end = (start + SOURCE_BLOCK).min(ns);
        stepper.run(&pulse.samples, start..end, Some(&e))
    });
    let mut data = DMatrix::zeros(ns * nr, pulse.len());
    for (b, series) in results.iter().enumerate() {
        let start = b * SOURCE_BLOCK;
        for (n, v) in series.iter().enumerate() {
            for ls in 0..v.ncols() {
                for r in 0..nr {
                    data[((start + ls) * nr + r, n)] = v[(r, ls)];
                }
            }
        }
    }
    Ok(dataset(config, pulse, data))
}

/// Independent route: `V̂_sr(ω) = ĥ(ω) S[(λ(ω) I − K*)^{-1} ∂U_s/∂ν](x_r)` on
/// the zero-padded DFT grid, transformed back to time.
pub fn simulate_msr_frequency_domain(
    mesh: &BoundaryMesh,
    material: &Material,
    config: &AcquisitionConfig,
    pulse: &Pulse,
) -> Result<MSRDataset> {
    check_setup(mesh, material, config)?;
    let solver = ShiftedSolver::new(&deflated_np(mesh)?)?;
    let f = solver.prepare(&source_terms(mesh, &config.sources));
    let eq = (single_layer_evaluator(mesh, &config.receivers)? * solver.basis()).map(|x| Complex::new(x, 0.0));
    let dt = pulse.dt();
    let h = pulse.padded_spectrum(PADDING);
    let total = h.len();
    let half = total / 2;
    let peak = h.iter().fold(0.0f64, |a, c| a.max(c.norm()));
    let (ns, nr) = (config.ns(), config.nr());
    let positive = exec::try_map_indexed(half + 1, |k| -> Result<Option<DMatrix<Complex<f64>>>> {
        if k == 0 || h[k].norm() <= SPECTRUM_CUTOFF * peak {
            return Ok(None);
        }
        let lambda = material.lambda_at(fourier::frequency(k, total, dt));
        let y = solver.solve_prepared(lambda, &f)?;
        Ok(Some(&eq * y * h[k]))
    })?;
    let mut data = DMatrix::zeros(ns * nr, pulse.len());
    let mut spectrum = vec![Complex::new(0.0, 0.0); total];
    for s in 0..ns {
        for r in 0..nr {
            spectrum.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (k, v) in positive.iter().enumerate() {
                if let Some(v) = v {
                    spectrum[k] = v[(r, s)];
                    if k < total - k {
                        spectrum[total - k] = v[(r, s)].conj();
                    }
                }
            }
            let series = fourier::inverse_real(&spectrum, dt);
            for n in 0..pulse.len() {
                data[(s * nr + r, n)] = series[n];
            }
        }
    }
    Ok(dataset(config, pulse, data))
}

/// Adds i.i.d. Gaussian noise of standard deviation `level · rms(V)`.
/// `level` is a fraction: 1.0 means 100%.
pub fn add_noise(data: &MSRDataset, level: f64, seed: u64) -> Result<MSRDataset> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be a nonnegative number, got {level}"
        )));
    }
    let mut out = data.clone();
    if level == 0.0 {
        return Ok(out);
    }
    let sigma = level * data.rms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.data.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    out.noise_level = level;
    out.seed = Some(seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::build_array;
    use crate::geometry::make_shape;
    use crate::potentials::weighted_mean;
    use crate::pulse::base_pulse;
    use std::f64::consts::PI;

    fn small_array(aperture: f64, ns: usize) -> AcquisitionConfig {
        build_array(&AcquisitionSpec {
            ns,
            aperture,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn shift_reduces_to_static_value() {
        let m = Material::new(10.0, 1.0).unwrap();
        assert!((implicit_shift(&m, 1e12) - m.lambda()).abs() < 1e-10);
        assert!((implicit_shift(&m, 1e-12) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn zero_pulse_gives_zero_density() {
        let mesh = make_shape("ellipse", 64).unwrap();
        let cfg = small_array(PI / 4.0, 4);
        let pulse = base_pulse(5.0, 64).unwrap().scaled(0.0);
        let d = solve_density(&mesh, &Material::new(10.0, 1.0).unwrap(), &cfg.sources[0], &pulse).unwrap();
        assert!(d.steps.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn densities_stay_mean_zero() {
        let mesh = make_shape("letterL", 128).unwrap();
        let cfg = small_array(PI / 4.0, 4);
        let pulse = base_pulse(5.0, 128).unwrap();
        let d = solve_density(&mesh, &Material::new(10.0, 1.0).unwrap(), &cfg.sources[2], &pulse).unwrap();
        assert_eq!(d.len(), 128);
        assert!(d.step(0).iter().all(|&x| x == 0.0));
        for n in 0..d.len() {
            let phi = d.step(n);
            assert!(weighted_mean(&mesh, &phi).abs() <= 1e-8 * phi.norm() + 1e-300);
        }
    }

    #[test]
    fn causal_onset_and_linearity() {
        let mesh = make_shape("flower", 128).unwrap();
        let mat = crate::geometry::ShapeId::Flower.material();
        let cfg = small_array(PI / 8.0, 6);
        let pulse = base_pulse(5.0, 128).unwrap();
        let v = simulate_msr(&mesh, &mat, &cfg, &pulse).unwrap();
        assert!(v.data.column(0).iter().all(|&x| x == 0.0));
        let peak = v.data.amax();
        let onset = (pulse.len() as f64 * 0.02).ceil() as usize;
        for n in 0..onset {
            assert!(v.data.column(n).amax() <= 1e-3 * peak);
        }
        let mut doubled = cfg.clone();
        for s in doubled.sources.iter_mut() {
            s.charges = s.charges.map(|a| 2.0 * a);
        }
        let v2 = simulate_msr(&mesh, &mat, &doubled, &pulse).unwrap();
        assert!((&v2.data - &v.data * 2.0).amax() <= 1e-14 * peak);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mesh = make_shape("ellipse", 64).unwrap();
        let mat = Material::new(10.0, 1.0).unwrap();
        let cfg = small_array(PI / 8.0, 40);
        let pulse = base_pulse(5.0, 64).unwrap();
        let a = simulate_msr(&mesh, &mat, &cfg, &pulse).unwrap();
        // column-by-column reference
        let f = source_terms(&mesh, &cfg.sources);
        let stepper = Stepper::new(&mesh, &mat, pulse.dt(), &f).unwrap();
        let e = single_layer_evaluator(&mesh, &cfg.receivers).unwrap();
        for s in [0, 17, 39] {
            let series = stepper.run(&pulse.samples, s..s + 1, Some(&e));
            for n in [10, 40, 63] {
                for r in [0, 5, 39] {
                    let x = series[n][(r, 0)];
                    assert!((x - a.value(s, r, n)).abs() <= 1e-12 * a.data.amax());
                }
            }
        }
    }

    #[test]
    fn noise_contract() {
        let mesh = make_shape("ellipse", 64).unwrap();
        let cfg = small_array(PI / 16.0, 50);
        let pulse = base_pulse(5.0, 64).unwrap();
        let clean = simulate_msr(&mesh, &Material::new(10.0, 1.0).unwrap(), &cfg, &pulse).unwrap();
        assert_eq!(add_noise(&clean, 0.0, 3).unwrap(), clean);
        let a = add_noise(&clean, 1.0, 7).unwrap();
        let b = add_noise(&clean, 1.0, 7).unwrap();
        let c = add_noise(&clean, 1.0, 8).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
        let noise = &a.data - &clean.data;
        let ratio = (noise.norm_squared() / noise.len() as f64).sqrt() / clean.rms();
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
        assert!(add_noise(&clean, -1.0, 0).is_err());
    }
}
