//! Discrete layer potentials on a [`BoundaryMesh`].
//!
//! With `Γ(x) = log|x| / 2π`, the single layer potential is
//! `S[φ](x) = ∫ Γ(x − y) φ(y) ds(y)` and the Neumann–Poincaré operator is
//! `K*[φ](x) = ∫ ν_x·(x − y) / (2π|x − y|²) φ(y) ds(y)`. Both are discretized
//! by the Nyström rule at the panel collocation points.

use std::f64::consts::{FRAC_1_PI, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{BoundaryMesh, Vec2};
use crate::linalg::zero_mean_basis;

const INV_2PI: f64 = 0.5 * FRAC_1_PI;

/// Fundamental solution of the Laplacian in the plane.
pub fn green(x: Vec2) -> f64 {
    INV_2PI * x.norm().ln()
}

/// Gradient of [`green`].
pub fn green_gradient(x: Vec2) -> Vec2 {
    x * (INV_2PI / x.norm_squared())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    SingleLayer,
    NeumannPoincare,
}

/// Dense Nyström matrix of a boundary operator. Column `k` carries the panel
/// weight `w_k`, so `matrix * φ` applies the operator to the nodal values of
/// a density.
#[derive(Debug, Clone)]
pub struct BoundaryOperator {
    pub matrix: DMatrix<f64>,
    pub kind: OperatorKind,
    pub mesh_key: u64,
}

impl BoundaryOperator {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, density: &DVector<f64>) -> DVector<f64> {
        &self.matrix * density
    }

    fn check_mesh(&self, mesh: &BoundaryMesh) -> Result<()> {
        if self.mesh_key != mesh.key() {
            return Err(Error::InvalidArgument(
                "operator was assembled on a different mesh".into(),
            ));
        }
        Ok(())
    }
}

fn assemble_rows<F>(m: usize, row: F) -> DMatrix<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    let rows = exec::map_indexed(m, row);
    DMatrix::from_fn(m, m, |i, k| rows[i][k])
}

/// Single layer matrix; the diagonal integrates the logarithm exactly over a
/// straight panel of length `w_i` centered at the collocation point.
pub fn assemble_single_layer(mesh: &BoundaryMesh) -> Result<BoundaryOperator> {
    mesh.validate()?;
    let m = mesh.len();
    let matrix = assemble_rows(m, |i| {
        let x = mesh.points[i];
        (0..m)
            .map(|k| {
                let w = mesh.weights[k];
                if k == i {
                    INV_2PI * w * ((w / 2.0).ln() - 1.0)
                } else {
                    w * green(x - mesh.points[k])
                }
            })
            .collect()
    });
    Ok(BoundaryOperator {
        matrix,
        kind: OperatorKind::SingleLayer,
        mesh_key: mesh.key(),
    })
}

/// Neumann–Poincaré matrix.
///
/// The continuous kernel tends to `κ(x) / 4π` on the diagonal. Instead of
/// that limit the diagonal is fixed by the discrete form of `K[1] = 1/2`,
/// i.e. every weighted column sum `Σ_i w_i K*_{ik}` equals `w_k / 2`. On
/// smooth curves the two choices agree to quadrature accuracy; on curves with
/// curvature jumps the discrete identity keeps `K*` mapping mean-zero
/// densities to mean-zero densities exactly.
pub fn assemble_neumann_poincare(mesh: &BoundaryMesh) -> Result<BoundaryOperator> {
    mesh.validate()?;
    let m = mesh.len();
    let mut matrix = assemble_rows(m, |i| {
        let (x, n) = (mesh.points[i], mesh.normals[i]);
        (0..m)
            .map(|k| {
                if k == i {
                    0.0
                } else {
                    mesh.weights[k] * n.dot(&green_gradient(x - mesh.points[k]))
                }
            })
            .collect()
    });
    for k in 0..m {
        let off: f64 = (0..m).map(|i| mesh.weights[i] * matrix[(i, k)]).sum();
        matrix[(k, k)] = 0.5 - off / mesh.weights[k];
    }
    Ok(BoundaryOperator {
        matrix,
        kind: OperatorKind::NeumannPoincare,
        mesh_key: mesh.key(),
    })
}

/// Continuous-limit diagonal `w_i κ(x_i) / 4π` of the Neumann–Poincaré matrix.
pub fn curvature_diagonal(mesh: &BoundaryMesh) -> Vec<f64> {
    (0..mesh.len())
        .map(|i| mesh.weights[i] * mesh.curvature[i] / (4.0 * PI))
        .collect()
}

/// Matrix `E` with `E[r, k] = w_k Γ(x_r − y_k)`, so that `E φ` evaluates the
/// single layer potential of `φ` at the targets.
pub fn single_layer_evaluator(mesh: &BoundaryMesh, targets: &[Vec2]) -> Result<DMatrix<f64>> {
    let panel = mesh.max_panel();
    for &x in targets {
        let distance = mesh.distance_to(x);
        if distance <= panel || mesh.contains(x) {
            return Err(Error::NearSingularEvaluation { distance, panel });
        }
    }
    let rows = exec::map_indexed(targets.len(), |r| {
        (0..mesh.len())
            .map(|k| mesh.weights[k] * green(targets[r] - mesh.points[k]))
            .collect::<Vec<_>>()
    });
    Ok(DMatrix::from_fn(targets.len(), mesh.len(), |r, k| rows[r][k]))
}

/// Evaluates `S[φ]` at points strictly outside the boundary.
pub fn eval_single_layer(mesh: &BoundaryMesh, density: &DVector<f64>, targets: &[Vec2]) -> Result<Vec<f64>> {
    if density.len() != mesh.len() {
        return Err(Error::InvalidArgument(format!(
            "density has {} entries for {} panels",
            density.len(),
            mesh.len()
        )));
    }
    let e = single_layer_evaluator(mesh, targets)?;
    Ok((e * density).iter().copied().collect())
}

/// Weighted mean `Σ w_i φ_i / Σ w_i`.
pub fn weighted_mean(mesh: &BoundaryMesh, density: &DVector<f64>) -> f64 {
    let w = DVector::from_column_slice(&mesh.weights);
    w.dot(density) / w.sum()
}

/// Eigen-decomposition of `K*` on weight-mean-zero densities, orthonormal in
/// the inner product `⟨φ, ψ⟩_S = −∫ S[φ] ψ ds`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns (`M × (M − 1)`).
    pub eigenvectors: DMatrix<f64>,
    /// Gram matrix `G = −W S` of the inner product, `⟨φ, ψ⟩_S = ψᵀ G φ`.
    pub gram: DMatrix<f64>,
    /// Largest `‖K* u_j − μ_j u_j‖_S`.
    pub eigen_residual: f64,
    /// Largest deviation of `UᵀGU` from the identity.
    pub orthonormality_error: f64,
    pub weights: Vec<f64>,
}

impl SpectralData {
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        b.dot(&(&self.gram * a))
    }

    /// Coefficients `⟨φ, u_j⟩_S` for every mode.
    pub fn coefficients(&self, density: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.transpose() * (&self.gram * density)
    }

    /// Removes the weighted mean of `density`.
    pub fn project_zero_mean(&self, density: &DVector<f64>) -> DVector<f64> {
        let w = DVector::from_column_slice(&self.weights);
        density - DVector::from_element(density.len(), w.dot(density) / w.sum())
    }
}

/// Solves the symmetrized eigenproblem of `K*` restricted to mean-zero
/// densities. `K*` is self-adjoint for `⟨·,·⟩_S` (Calderón identity), which
/// the discretization satisfies only approximately; the symmetric part of
/// `G K*` is used and the residual is reported.
pub fn spectral_decomposition(
    mesh: &BoundaryMesh,
    single: &BoundaryOperator,
    np: &BoundaryOperator,
) -> Result<SpectralData> {
    if single.kind != OperatorKind::SingleLayer || np.kind != OperatorKind::NeumannPoincare {
        return Err(Error::InvalidArgument(
            "expected a single layer and a Neumann-Poincaré operator".into(),
        ));
    }
    single.check_mesh(mesh)?;
    np.check_mesh(mesh)?;
    let m = mesh.len();
    let w = DVector::from_column_slice(&mesh.weights);
    let mut gram = -DMatrix::from_diagonal(&w) * &single.matrix;
    gram = (&gram + gram.transpose()) * 0.5;
    let gk = &gram * &np.matrix;
    let h = (&gk + gk.transpose()) * 0.5;

    let q = zero_mean_basis(&mesh.weights);
    let gq = q.transpose() * &gram * &q;
    let chol = gq
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SpectralFailure("single layer Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SpectralFailure("singular Cholesky factor".into()))?;
    let c = &linv * (q.transpose() * &h * &q) * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| Error::SpectralFailure("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..m - 1).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let z = DMatrix::from_fn(m - 1, m - 1, |r, c| eig.eigenvectors[(r, order[c])]);
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let u = &q * (linv.transpose() * z);

    let ku = &np.matrix * &u;
    let mut eigen_residual: f64 = 0.0;
    for (j, mu) in eigenvalues.iter().enumerate() {
        let r = ku.column(j) - u.column(j) * *mu;
        let r = r.clone_owned();
        eigen_residual = eigen_residual.max(r.dot(&(&gram * &r)).abs().sqrt());
    }
    let ortho = u.transpose() * &gram * &u - DMatrix::identity(m - 1, m - 1);
    let orthonormality_error = ortho.amax();
    if !eigen_residual.is_finite() || orthonormality_error > 1e-6 {
        return Err(Error::SpectralFailure(format!(
            "residual {eigen_residual:.3e}, orthonormality error {orthonormality_error:.3e}"
        )));
    }
    Ok(SpectralData {
        eigenvalues,
        eigenvectors: u,
        gram,
        eigen_residual,
        orthonormality_error,
        weights: mesh.weights.clone(),
    })
}
