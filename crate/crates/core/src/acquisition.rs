//! Limited-view transmitter/receiver arrays, the background field of a
//! dipole source and the linear operator of the first-order expansion
//! `V_sr(t) ≈ A_s N(t) B_rᵀ`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, Vec2};
use crate::gpt::PTSeries;
use crate::potentials::{green, green_gradient};

/// Serializable description of an acquisition system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionSpec {
    pub radius: f64,
    pub ns: usize,
    /// Angle of view in radians, in `(0, 2π]`.
    pub aperture: f64,
    pub dipole_sep: f64,
    /// Reference point of the expansion.
    pub z: [f64; 2],
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        Self {
            radius: 10.7,
            ns: 50,
            aperture: PI / 16.0,
            dipole_sep: 0.1,
            z: [0.0, 0.0],
        }
    }
}

/// A pair of opposite point charges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSource {
    pub positions: [Vec2; 2],
    pub charges: [f64; 2],
}

impl DipoleSource {
    pub fn midpoint(&self) -> Vec2 {
        (self.positions[0] + self.positions[1]) * 0.5
    }

    /// Static part `Ũ(x) = Σ_j a_j Γ(x − x_j)` of the background potential.
    pub fn potential(&self, x: Vec2) -> Result<f64> {
        let mut u = 0.0;
        for (p, a) in self.positions.iter().zip(self.charges) {
            let d = (x - p).norm();
            if d <= 1e-12 * (1.0 + p.norm()) {
                return Err(Error::SourcePointEvaluation(d));
            }
            u += a * green(x - p);
        }
        Ok(u)
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        self.positions
            .iter()
            .zip(self.charges)
            .map(|(p, a)| green_gradient(x - p) * a)
            .sum()
    }

    /// `∂Ũ/∂ν` at the collocation points of `mesh`.
    pub fn normal_derivative(&self, mesh: &BoundaryMesh) -> DVector<f64> {
        DVector::from_iterator(
            mesh.len(),
            (0..mesh.len()).map(|i| self.gradient(mesh.points[i]).dot(&mesh.normals[i])),
        )
    }
}

/// Sources and receivers on an arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub spec: AcquisitionSpec,
    pub sources: Vec<DipoleSource>,
    pub receivers: Vec<Vec2>,
}

/// Whether `aperture` covers the full circle.
fn is_full_view(aperture: f64) -> bool {
    (aperture - TAU).abs() <= 1e-12
}

/// Builds the array: source centers at angles `α k / (N_s − 1)` (or
/// `2π k / N_s` for the full view, so no position is repeated), dipole axes
/// tangent to the arc, receivers at the source centers.
pub fn build_array(spec: &AcquisitionSpec) -> Result<AcquisitionConfig> {
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {}",
            spec.radius
        )));
    }
    if !(spec.aperture > 0.0 && spec.aperture <= TAU + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "aperture must lie in (0, 2π], got {}",
            spec.aperture
        )));
    }
    if spec.ns < 2 {
        return Err(Error::InvalidArgument("at least two sources are needed".into()));
    }
    if !(spec.dipole_sep > 0.0 && spec.dipole_sep < spec.radius) {
        return Err(Error::InvalidArgument(format!(
            "dipole separation must lie in (0, radius), got {}",
            spec.dipole_sep
        )));
    }
    let step = if is_full_view(spec.aperture) {
        TAU / spec.ns as f64
    } else {
        spec.aperture / (spec.ns - 1) as f64
    };
    let mut sources = Vec::with_capacity(spec.ns);
    let mut receivers = Vec::with_capacity(spec.ns);
    for k in 0..spec.ns {
        let (s, c) = (k as f64 * step).sin_cos();
        let center = Vec2::new(c, s) * spec.radius;
        let tangent = Vec2::new(-s, c) * (0.5 * spec.dipole_sep);
        sources.push(DipoleSource {
            positions: [center + tangent, center - tangent],
            charges: [1.0, -1.0],
        });
        receivers.push(center);
    }
    Ok(AcquisitionConfig {
        spec: *spec,
        sources,
        receivers,
    })
}

impl AcquisitionConfig {
    pub fn ns(&self) -> usize {
        self.sources.len()
    }

    pub fn nr(&self) -> usize {
        self.receivers.len()
    }

    pub fn z(&self) -> Vec2 {
        Vec2::new(self.spec.z[0], self.spec.z[1])
    }

    /// The same array with a different reference point.
    pub fn with_reference(&self, z: Vec2) -> Self {
        let mut out = self.clone();
        out.spec.z = [z.x, z.y];
        out
    }

    /// Fails if a source or receiver lies inside the target or closer to its
    /// boundary than the dipole separation or the panel size.
    pub fn check_clearance(&self, mesh: &BoundaryMesh) -> Result<()> {
        let margin = self.spec.dipole_sep.max(mesh.max_panel());
        let points = self
            .sources
            .iter()
            .flat_map(|s| s.positions)
            .chain(self.receivers.iter().copied());
        for p in points {
            if mesh.contains(p) || mesh.distance_to(p) <= margin {
                return Err(Error::GeometryCollision(format!(
                    "array point ({:.3}, {:.3}) touches the target",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    /// `U(t_n, x)` for source `s` on the sample grid of `pulse_samples`,
    /// returned as one row per point.
    pub fn background_field(&self, source: usize, pulse_samples: &[f64], points: &[Vec2]) -> Result<Vec<Vec<f64>>> {
        let src = self
            .sources
            .get(source)
            .ok_or_else(|| Error::InvalidArgument(format!("no source {source}")))?;
        points
            .iter()
            .map(|&x| {
                let u = src.potential(x)?;
                Ok(pulse_samples.iter().map(|h| h * u).collect())
            })
            .collect()
    }
}

/// Linear map from the symmetric tensor `(N11, N12, N22)` to the stacked
/// data vector with row index `s · N_r + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator {
    pub matrix: DMatrix<f64>,
    pub order: u32,
    pub ns: usize,
    pub nr: usize,
}

/// `Σ_j a_j (cos θ_j, sin θ_j) / (2π ρ_j)` in polar coordinates about `z`.
fn source_vector(src: &DipoleSource, z: Vec2) -> Result<Vec2> {
    let mut a = Vec2::zeros();
    for (p, q) in src.positions.iter().zip(src.charges) {
        let d = p - z;
        let rho = d.norm();
        if rho == 0.0 {
            return Err(Error::InvalidArgument("source located at the reference point".into()));
        }
        a += d * (q / (TAU * rho * rho));
    }
    Ok(a)
}

fn receiver_vector(x: Vec2, z: Vec2) -> Result<Vec2> {
    let d = x - z;
    let rho = d.norm();
    if rho == 0.0 {
        return Err(Error::InvalidArgument("receiver located at the reference point".into()));
    }
    Ok(d / (TAU * rho * rho))
}

/// First-order operator `N ↦ (A_s N B_rᵀ)_{s,r}` about the reference point
/// of `config`. Only `order = 1` is supported.
pub fn build_forward_operator(config: &AcquisitionConfig, order: u32) -> Result<ForwardOperator> {
    if order != 1 {
        return Err(Error::InvalidArgument(format!(
            "only first-order expansions are supported, got order {order}"
        )));
    }
    let z = config.z();
    let a: Vec<Vec2> = config
        .sources
        .iter()
        .map(|s| source_vector(s, z))
        .collect::<Result<_>>()?;
    let b: Vec<Vec2> = config
        .receivers
        .iter()
        .map(|&x| receiver_vector(x, z))
        .collect::<Result<_>>()?;
    let (ns, nr) = (a.len(), b.len());
    let mut matrix = DMatrix::zeros(ns * nr, 3);
    for s in 0..ns {
        for r in 0..nr {
            let row = s * nr + r;
            matrix[(row, 0)] = a[s].x * b[r].x;
            matrix[(row, 1)] = a[s].x * b[r].y + a[s].y * b[r].x;
            matrix[(row, 2)] = a[s].y * b[r].y;
        }
    }
    Ok(ForwardOperator { matrix, order, ns, nr })
}

impl ForwardOperator {
    /// Predicted data vector for one symmetric tensor.
    pub fn apply(&self, n: &Matrix2<f64>) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(&[n[(0, 0)], 0.5 * (n[(0, 1)] + n[(1, 0)]), n[(1, 1)]])
    }

    /// Predicted data for a whole series: one column per time sample.
    pub fn apply_series(&self, series: &PTSeries) -> DMatrix<f64> {
        let u = DMatrix::from_fn(3, series.len(), |c, n| series.values[n][c]);
        &self.matrix * u
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .matrix
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn condition_number(&self) -> f64 {
        let s = self.singular_values();
        s[0] / s[s.len() - 1]
    }
}
