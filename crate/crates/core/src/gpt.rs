//! Frequency-domain generalized polarization tensors and their filtered,
//! time-domain versions.
//!
//! For orders `m, n ≥ 1` and `P, Q ∈ {C, S}` with `C_m + i S_m = (x − z)^m`
//! (coordinates written as complex numbers), the tensor entry is
//!
//! `M̂[P_m, Q_n](ω) = ∫ Q_n (λ(ω) I − K*)^{−1}[∂P_m/∂ν] ds`,
//!
//! with row index `P` and column index `Q`. The filtered tensor of a pulse
//! `h` is `N̂(ω) = ĥ(ω) M̂(ω)`; its inverse transform is a causal real series.

use nalgebra::{Complex, DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::fourier;
use crate::geometry::{BoundaryMesh, Material, Vec2};
use crate::linalg::ShiftedSolver;
use crate::potentials::{assemble_neumann_poincare, SpectralData};
use crate::pulse::Pulse;

/// Zero padding applied before transforming back to the time domain, so the
/// inverse transform computes a linear rather than circular convolution.
pub const PADDING: usize = 8;

/// Pulse spectrum bins below this fraction of the peak are treated as zero.
pub const SPECTRUM_CUTOFF: f64 = 1e-14;

/// Values and normal derivatives of `C_m` and `S_m` at the collocation points.
#[derive(Debug, Clone)]
pub struct HarmonicData {
    pub c: DVector<f64>,
    pub s: DVector<f64>,
    pub dc: DVector<f64>,
    pub ds: DVector<f64>,
}

pub fn harmonic_polynomials(mesh: &BoundaryMesh, center: Vec2, order: u32) -> Result<HarmonicData> {
    if order == 0 {
        return Err(Error::InvalidArgument("polynomial order must be at least 1".into()));
    }
    let m = mesh.len();
    let mut out = HarmonicData {
        c: DVector::zeros(m),
        s: DVector::zeros(m),
        dc: DVector::zeros(m),
        ds: DVector::zeros(m),
    };
    for i in 0..m {
        let x = mesh.points[i] - center;
        let zeta = Complex::new(x.x, x.y);
        let p = zeta.powu(order);
        let n = mesh.normals[i];
        let dp = zeta.powu(order - 1) * Complex::new(n.x, n.y) * order as f64;
        out.c[i] = p.re;
        out.s[i] = p.im;
        out.dc[i] = dp.re;
        out.ds[i] = dp.im;
    }
    Ok(out)
}

/// Removes the weighted mean, restoring the exact zero flux of a normal
/// derivative of a harmonic function.
pub(crate) fn remove_weighted_mean(weights: &[f64], v: &mut DVector<f64>) {
    let total: f64 = weights.iter().sum();
    let mean: f64 = weights.iter().zip(v.iter()).map(|(w, x)| w * x).sum::<f64>() / total;
    v.add_scalar_mut(-mean);
}

/// `K*` minus the rank-one term `1 wᵀ / |∂D|`. For a mean-zero right-hand
/// side, `(λ I − K') φ = f` has the same solution as `(λ I − K*) φ = f`, and
/// the shifted matrix stays invertible at `λ = 1/2`.
pub(crate) fn deflated_np(mesh: &BoundaryMesh) -> Result<DMatrix<f64>> {
    let mut k = assemble_neumann_poincare(mesh)?.matrix;
    let perimeter = mesh.perimeter();
    for c in 0..mesh.len() {
        let shift = mesh.weights[c] / perimeter;
        for r in 0..mesh.len() {
            k[(r, c)] -= shift;
        }
    }
    Ok(k)
}

/// Tensor of orders `(m, n)` at one frequency. Rows and columns are indexed
/// by `(C, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GPTFreq {
    pub m: u32,
    pub n: u32,
    pub omega: f64,
    pub matrix: Matrix2<Complex<f64>>,
}

impl GPTFreq {
    /// Largest `|M[0,1] − M[1,0]|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.iter().fold(0.0f64, |a, c| a.max(c.norm()));
        (self.matrix[(0, 1)] - self.matrix[(1, 0)]).norm() / scale
    }
}

/// Resolvent data of one shape, reused across frequencies.
pub struct GptSweep {
    solver: ShiftedSolver,
    material: Material,
    m: u32,
    n: u32,
    /// `Qᵀ [∂C_m/∂ν, ∂S_m/∂ν]` in the Hessenberg basis.
    rhs: DMatrix<f64>,
    /// Rows `(w ∘ C_n)ᵀ Q` and `(w ∘ S_n)ᵀ Q`.
    moments: DMatrix<f64>,
}

impl GptSweep {
    pub fn new(mesh: &BoundaryMesh, material: &Material, center: Vec2, m: u32, n: u32) -> Result<Self> {
        material.validate()?;
        let size = mesh.len();
        let k = deflated_np(mesh)?;
        let solver = ShiftedSolver::new(&k)?;
        let src = harmonic_polynomials(mesh, center, m)?;
        let mut dc = src.dc;
        let mut ds = src.ds;
        remove_weighted_mean(&mesh.weights, &mut dc);
        remove_weighted_mean(&mesh.weights, &mut ds);
        let mut f = DMatrix::zeros(size, 2);
        f.set_column(0, &dc);
        f.set_column(1, &ds);
        let rhs = solver.prepare(&f);
        let tst = harmonic_polynomials(mesh, center, n)?;
        let mut wq = DMatrix::zeros(2, size);
        for i in 0..size {
            wq[(0, i)] = mesh.weights[i] * tst.c[i];
            wq[(1, i)] = mesh.weights[i] * tst.s[i];
        }
        // the density is Q y; fold Q into the moment rows once
        let moments = wq * solver.basis();
        Ok(Self {
            solver,
            material: *material,
            m,
            n,
            rhs,
            moments,
        })
    }

    /// Tensor for the shift `λ` (use [`Material::lambda_at`] for a frequency).
    pub fn at_lambda(&self, lambda: Complex<f64>) -> Result<Matrix2<Complex<f64>>> {
        let y = self.solver.solve_prepared(lambda, &self.rhs)?;
        let mc = self.moments.map(|x| Complex::new(x, 0.0)) * y;
        // mc[(q, p)] = ∫ Q φ_P; rows of the result are indexed by P
        Ok(Matrix2::new(mc[(0, 0)], mc[(1, 0)], mc[(0, 1)], mc[(1, 1)]))
    }

    pub fn at(&self, omega: f64) -> Result<GPTFreq> {
        Ok(GPTFreq {
            m: self.m,
            n: self.n,
            omega,
            matrix: self.at_lambda(self.material.lambda_at(omega))?,
        })
    }

    /// The limit `ω → ∞`, where `λ(ω) → 1/2`.
    pub fn high_frequency_limit(&self) -> Result<Matrix2<Complex<f64>>> {
        self.at_lambda(Complex::new(0.5, 0.0))
    }
}

/// Tensor of orders `(m, n)` at frequency `ω`, harmonic polynomials centered
/// at `center`.
pub fn gpt_freq(mesh: &BoundaryMesh, material: &Material, omega: f64, m: u32, n: u32, center: Vec2) -> Result<GPTFreq> {
    GptSweep::new(mesh, material, center, m, n)?.at(omega)
}

/// Time series of real symmetric 2×2 filtered polarization tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PTSeries {
    pub scale: i32,
    pub dt: f64,
    /// `(N11, N12, N22)` at `t_n = n dt`.
    pub values: Vec<[f64; 3]>,
    /// Label of the generating shape, when known.
    pub shape: Option<String>,
    pub material: Option<Material>,
    /// Largest `|N(t)|_F` over the negative-time part of the padded series,
    /// relative to the peak.
    pub causality_residual: f64,
    /// Largest `|N12 − N21|` before symmetrization, relative to the peak.
    pub asymmetry: f64,
}

impl PTSeries {
    pub fn from_values(scale: i32, dt: f64, values: Vec<[f64; 3]>) -> Self {
        Self {
            scale,
            dt,
            values,
            shape: None,
            material: None,
            causality_residual: 0.0,
            asymmetry: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| n as f64 * self.dt).collect()
    }

    pub fn matrix(&self, n: usize) -> Matrix2<f64> {
        let [a, b, c] = self.values[n];
        Matrix2::new(a, b, b, c)
    }

    pub fn frobenius(&self, n: usize) -> f64 {
        let [a, b, c] = self.values[n];
        (a * a + 2.0 * b * b + c * c).sqrt()
    }

    /// Singular values `(τ₁, τ₂)`, `τ₁ ≥ τ₂ ≥ 0`, at sample `n`.
    pub fn singular_values(&self, n: usize) -> (f64, f64) {
        let [a, b, c] = self.values[n];
        let mean = 0.5 * (a + c);
        let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let (l1, l2) = ((mean + radius).abs(), (mean - radius).abs());
        (l1.max(l2), l1.min(l2))
    }

    pub fn peak(&self) -> f64 {
        (0..self.len()).map(|n| self.frobenius(n)).fold(0.0, f64::max)
    }

    /// Relative L² distance to `other` on the common samples.
    pub fn relative_l2(&self, other: &PTSeries) -> f64 {
        let (mut diff, mut norm) = (0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            diff += (a[0] - b[0]).powi(2) + 2.0 * (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
            norm += b[0] * b[0] + 2.0 * b[1] * b[1] + b[2] * b[2];
        }
        (diff / norm).sqrt()
    }
}

/// Inverse transform of a 2×2 spectrum on the padded grid. Returns the first
/// `n` samples, the causality residual and the asymmetry.
fn spectrum_to_series(spectrum: &[Matrix2<Complex<f64>>], dt: f64, n: usize) -> (Vec<[f64; 3]>, f64, f64) {
    let entry = |r: usize, c: usize| -> Vec<f64> {
        let s: Vec<Complex<f64>> = spectrum.iter().map(|m| m[(r, c)]).collect();
        fourier::inverse_real(&s, dt)
    };
    let (n11, n12, n21, n22) = (entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1));
    let total = n11.len();
    let frob = |i: usize| (n11[i].powi(2) + n12[i].powi(2) + n21[i].powi(2) + n22[i].powi(2)).sqrt();
    let peak = (0..total).map(frob).fold(0.0, f64::max);
    let values = (0..n).map(|i| [n11[i], 0.5 * (n12[i] + n21[i]), n22[i]]).collect();
    if peak == 0.0 {
        return (values, 0.0, 0.0);
    }
    let causality = (total - n..total).map(frob).fold(0.0, f64::max) / peak;
    let asymmetry = (0..total).map(|i| (n12[i] - n21[i]).abs()).fold(0.0, f64::max) / peak;
    (values, causality, asymmetry)
}

/// Filtered first-order tensor `N(t)` for the given pulse, computed on the
/// DFT grid of the zero-padded pulse and transformed back.
pub fn filtered_pt_series(mesh: &BoundaryMesh, material: &Material, pulse: &Pulse, center: Vec2) -> Result<PTSeries> {
    let sweep = GptSweep::new(mesh, material, center, 1, 1)?;
    filtered_pt_series_with(&sweep, pulse)
}

/// As [`filtered_pt_series`], reusing a prepared sweep.
pub fn filtered_pt_series_with(sweep: &GptSweep, pulse: &Pulse) -> Result<PTSeries> {
    let dt = pulse.dt();
    let h = pulse.padded_spectrum(PADDING);
    let total = h.len();
    let peak = h.iter().fold(0.0f64, |a, c| a.max(c.norm()));
    let half = total / 2;
    let zero = Matrix2::from_element(Complex::new(0.0, 0.0));
    let positive = exec::try_map_indexed(half + 1, |k| -> Result<Matrix2<Complex<f64>>> {
        if k == 0 || h[k].norm() <= SPECTRUM_CUTOFF * peak {
            return Ok(zero);
        }
        let omega = fourier::frequency(k, total, dt);
        Ok(sweep.at(omega)?.matrix * h[k])
    })?;
    let mut spectrum = vec![zero; total];
    for k in 0..=half {
        spectrum[k] = positive[k];
        if k > 0 && k < total - k {
            spectrum[total - k] = positive[k].map(|c| c.conj());
        }
    }
    let (values, causality_residual, asymmetry) = spectrum_to_series(&spectrum, dt, pulse.len());
    Ok(PTSeries {
        scale: pulse.scale,
        dt,
        values,
        shape: None,
        material: Some(sweep.material),
        causality_residual,
        asymmetry,
    })
}

/// Constants of the partial fraction
/// `1 / (λ(ω) − μ) = α (1 − β / (γ + iω))`.
pub fn mode_constants(material: &Material, mu: f64) -> Result<(f64, f64, f64)> {
    if !(material.epsilon > 0.0) {
        return Err(Error::InvalidMaterial("the spectral representation needs ε > 0".into()));
    }
    let alpha = 2.0 / (1.0 - 2.0 * mu);
    let beta = alpha / material.epsilon;
    let gamma = material.sigma / material.epsilon + (1.0 + 2.0 * mu) / (material.epsilon * (1.0 - 2.0 * mu));
    Ok((alpha, beta, gamma))
}

/// `∫_0^t e^{−γ(t−τ)} h(τ) dτ` on the sample grid, accumulated step by step
/// with composite Simpson quadrature on `substeps` sub-intervals per step.
fn exponential_convolution(h_fine: &[f64], substeps: usize, dt: f64, gamma: f64, n: usize) -> Vec<f64> {
    let hs = dt / substeps as f64;
    let mut out = vec![0.0; n];
    let decay = (-gamma * dt).exp();
    for step in 1..n {
        let base = (step - 1) * substeps;
        let mut integral = 0.0;
        for q in 0..=substeps {
            let coef = if q == 0 || q == substeps {
                1.0
            } else if q % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let tau_from_end = (substeps - q) as f64 * hs;
            integral += coef * (-gamma * tau_from_end).exp() * h_fine[base + q];
        }
        out[step] = decay * out[step - 1] + integral * hs / 3.0;
    }
    out
}

/// Filtered tensor assembled mode by mode from the spectral decomposition of
/// `K*`, in the time domain:
///
/// `N_PQ(t) = Σ_j ⟨∂P/∂ν, u_j⟩_S ∫ Q u_j ds · α_j [h(t) − β_j (g_j ∗ h)(t)]`
///
/// with `g_j(t) = e^{−γ_j t}` for `t ≥ 0`. Modes are taken by decreasing
/// source energy until `energy_fraction` of `‖∂P/∂ν‖²_S` is reached.
pub fn filtered_pt_spectral_oracle(
    spectral: &SpectralData,
    mesh: &BoundaryMesh,
    material: &Material,
    pulse: &Pulse,
    center: Vec2,
    energy_fraction: f64,
) -> Result<PTSeries> {
    if spectral.eigenvectors.nrows() != mesh.len() {
        return Err(Error::InvalidArgument("spectral data belongs to another mesh".into()));
    }
    let hp = harmonic_polynomials(mesh, center, 1)?;
    let mut dc = hp.dc.clone();
    let mut ds = hp.ds.clone();
    remove_weighted_mean(&mesh.weights, &mut dc);
    remove_weighted_mean(&mesh.weights, &mut ds);
    let coef_c = spectral.coefficients(&dc);
    let coef_s = spectral.coefficients(&ds);
    let w = DVector::from_column_slice(&mesh.weights);
    let mom_c = spectral.eigenvectors.transpose() * w.component_mul(&hp.c);
    let mom_s = spectral.eigenvectors.transpose() * w.component_mul(&hp.s);

    let modes = spectral.eigenvalues.len();
    let energy: Vec<f64> = (0..modes).map(|j| coef_c[j].powi(2) + coef_s[j].powi(2)).collect();
    let total: f64 = energy.iter().sum();
    let mut order: Vec<usize> = (0..modes).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]));
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for j in order {
        if acc >= energy_fraction * total && !kept.is_empty() {
            break;
        }
        acc += energy[j];
        kept.push(j);
    }

    let n = pulse.len();
    let dt = pulse.dt();
    let substeps = 4;
    let h_fine: Vec<f64> = (0..=(n - 1) * substeps)
        .map(|i| pulse.value_at(i as f64 * dt / substeps as f64))
        .collect();
    let mut values = vec![[0.0; 3]; n];
    let mut n21 = vec![0.0; n];
    let contributions = exec::try_map_indexed(kept.len(), |idx| {
        let j = kept[idx];
        let (alpha, beta, gamma) = mode_constants(material, spectral.eigenvalues[j])?;
        let conv = exponential_convolution(&h_fine, substeps, dt, gamma, n);
        let profile: Vec<f64> = (0..n)
            .map(|i| alpha * (h_fine[i * substeps] - beta * conv[i]))
            .collect();
        Ok::<_, Error>((j, profile))
    })?;
    for (j, profile) in contributions {
        let (cc, cs, sc, ss) = (
            coef_c[j] * mom_c[j],
            coef_c[j] * mom_s[j],
            coef_s[j] * mom_c[j],
            coef_s[j] * mom_s[j],
        );
        for i in 0..n {
            values[i][0] += cc * profile[i];
            values[i][1] += cs * profile[i];
            n21[i] += sc * profile[i];
            values[i][2] += ss * profile[i];
        }
    }
    let mut series = PTSeries::from_values(pulse.scale, dt, values);
    let peak = series.peak();
    if peak > 0.0 {
        series.asymmetry = (0..n).map(|i| (series.values[i][1] - n21[i]).abs()).fold(0.0, f64::max) / peak;
    }
    for (v, b) in series.values.iter_mut().zip(&n21) {
        v[1] = 0.5 * (v[1] + b);
    }
    series.material = Some(*material);
    Ok(series)
}
