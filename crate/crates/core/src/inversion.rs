//! Per-sample least-squares reconstruction of the filtered polarization
//! tensor from multi-static response data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::acquisition::ForwardOperator;
use crate::error::{Error, Result};
use crate::forward::MSRDataset;
use crate::gpt::PTSeries;

/// Relative singular-value threshold below which `L` counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InversionOptions {
    /// Tikhonov weight added to the normal equations; 0 means plain least
    /// squares.
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub series: PTSeries,
    /// `‖L u_n − V(t_n)‖₂` for each sample.
    pub residuals: Vec<f64>,
    pub condition_number: f64,
}

/// Pseudo-inverse of `L` (3 × rows) built from its SVD, with an optional
/// Tikhonov filter `s / (s² + μ)`.
fn pseudo_inverse(l: &DMatrix<f64>, regularization: f64) -> Result<(DMatrix<f64>, f64)> {
    if l.nrows() < 3 {
        return Err(Error::RankDeficient { rank: l.nrows() });
    }
    let svd = l.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let rank = s.iter().filter(|&&x| x > RANK_TOLERANCE * smax).count();
    if rank < 3 {
        return Err(Error::RankDeficient { rank });
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let filtered = DVector::from_iterator(3, s.iter().map(|&x| x / (x * x + regularization)));
    let pinv = vt.transpose() * DMatrix::from_diagonal(&filtered) * u.transpose();
    Ok((pinv, smax / s.min()))
}

/// Solves `min ‖L u − vec V(t_n)‖₂` for every sample `n` in the symmetric
/// basis `u = (N11, N12, N22)`.
pub fn reconstruct_pt(data: &MSRDataset, operator: &ForwardOperator) -> Result<ReconstructionResult> {
    reconstruct_pt_with(data, operator, &InversionOptions::default())
}

pub fn reconstruct_pt_with(
    data: &MSRDataset,
    operator: &ForwardOperator,
    options: &InversionOptions,
) -> Result<ReconstructionResult> {
    if operator.ns != data.ns || operator.nr != data.nr {
        return Err(Error::InvalidArgument(format!(
            "operator built for {}×{} pairs, data has {}×{}",
            operator.ns, operator.nr, data.ns, data.nr
        )));
    }
    if !(options.regularization >= 0.0) {
        return Err(Error::InvalidArgument("regularization must be nonnegative".into()));
    }
    let (pinv, condition_number) = pseudo_inverse(&operator.matrix, options.regularization)?;
    let u = &pinv * &data.data;
    let residual = &operator.matrix * &u - &data.data;
    let residuals = residual.column_iter().map(|c| c.norm()).collect();
    let values = u.column_iter().map(|c| [c[0], c[1], c[2]]).collect();
    Ok(ReconstructionResult {
        series: PTSeries::from_values(data.scale, data.dt, values),
        residuals,
        condition_number,
    })
}
