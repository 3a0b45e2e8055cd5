//! Small dense linear-algebra helpers not provided by nalgebra.

use nalgebra::{Complex, DMatrix, DVector, Hessenberg};

use crate::error::{Error, Result};

/// Orthonormal basis (as columns) of the complement of `weights`, built from
/// the Householder reflector that maps `weights / |weights|` to `−e_1`.
pub fn zero_mean_basis(weights: &[f64]) -> DMatrix<f64> {
    let m = weights.len();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let mut v = DVector::from_iterator(m, weights.iter().map(|w| w / norm));
    v[0] += 1.0;
    let vv = v.norm_squared();
    DMatrix::from_fn(m, m - 1, |r, c| {
        let col = c + 1;
        let id = if r == col { 1.0 } else { 0.0 };
        id - 2.0 * v[r] * v[col] / vv
    })
}

/// Shifted solves `(λ I − K) x = b` for many complex shifts `λ` from a single
/// orthogonal reduction `K = Q H Qᵀ` with `H` upper Hessenberg. Each solve
/// costs `O(M²)` instead of the `O(M³)` of a fresh factorization.
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    q: DMatrix<f64>,
    /// Row-major copy of the Hessenberg factor.
    h: Vec<f64>,
    m: usize,
}

impl ShiftedSolver {
    pub fn new(k: &DMatrix<f64>) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::InvalidArgument("operator must be square".into()));
        }
        let m = k.nrows();
        let (q, h) = Hessenberg::new(k.clone()).unpack();
        let h = (0..m * m).map(|idx| h[(idx / m, idx % m)]).collect();
        Ok(Self { q, h, m })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// The orthogonal factor `Q`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Projects right-hand sides into the Hessenberg basis once, for reuse
    /// across shifts.
    pub fn prepare(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.q.transpose() * rhs
    }

    /// Maps a solution back from the Hessenberg basis.
    pub fn finish(&self, y: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
        self.q.map(|x| Complex::new(x, 0.0)) * y
    }

    /// Solves `(λ I − H) y = c` for every column of the prepared `c`, by
    /// Gaussian elimination with partial pivoting between adjacent rows.
    pub fn solve_prepared(&self, lambda: Complex<f64>, prepared: &DMatrix<f64>) -> Result<DMatrix<Complex<f64>>> {
        let m = self.m;
        let nrhs = prepared.ncols();
        let mut a: Vec<Complex<f64>> = self.h.iter().map(|&x| Complex::new(-x, 0.0)).collect();
        for i in 0..m {
            a[i * m + i] += lambda;
        }
        // rhs stored row-major: row i holds the i-th entry of every column
        let mut b: Vec<Complex<f64>> = (0..m * nrhs)
            .map(|idx| Complex::new(prepared[(idx / nrhs, idx % nrhs)], 0.0))
            .collect();
        for k in 0..m.saturating_sub(1) {
            if a[(k + 1) * m + k].norm_sqr() > a[k * m + k].norm_sqr() {
                for c in k..m {
                    a.swap(k * m + c, (k + 1) * m + c);
                }
                for c in 0..nrhs {
                    b.swap(k * nrhs + c, (k + 1) * nrhs + c);
                }
            }
            let pivot = a[k * m + k];
            if pivot.norm() == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot at row {k}")));
            }
            let l = a[(k + 1) * m + k] / pivot;
            if l.norm_sqr() != 0.0 {
                for c in k + 1..m {
                    let t = a[k * m + c];
                    a[(k + 1) * m + c] -= l * t;
                }
                for c in 0..nrhs {
                    let t = b[k * nrhs + c];
                    b[(k + 1) * nrhs + c] -= l * t;
                }
            }
        }
        let mut y = DMatrix::from_element(m, nrhs, Complex::new(0.0, 0.0));
        for c in 0..nrhs {
            for i in (0..m).rev() {
                let mut s = b[i * nrhs + c];
                for j in i + 1..m {
                    s -= a[i * m + j] * y[(j, c)];
                }
                let d = a[i * m + i];
                if d.norm() == 0.0 {
                    return Err(Error::SingularSystem(format!("zero pivot at row {i}")));
                }
                y[(i, c)] = s / d;
            }
        }
        Ok(y)
    }

    pub fn solve(&self, lambda: Complex<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<Complex<f64>>> {
        let y = self.solve_prepared(lambda, &self.prepare(rhs))?;
        Ok(self.finish(&y))
    }
}
