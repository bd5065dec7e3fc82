//! QR reduction of stacked photometric errors.
//!
//! The N x 2 location Jacobian of a patch stack has rank 2 for corner-like
//! texture and rank 1 for line-like texture. Reducing the error through the
//! thin Q factor keeps the informative 1-2 dimensions and turns the N-row
//! photometric system into at most two rows for the filter update.

use super::FrontendError;
use nalgebra::{DMatrix, DVector};

/// Singular-value ratio below which a patch counts as a line feature.
const RANK1_RATIO: f64 = 0.05;
/// Leading singular value below which a patch carries no gradient at all.
const RANK0_SIGMA: f64 = 1e-9;

/// Reduced photometric error: `e = Q1^T e_full`, `r1` the surviving rows of
/// the triangular factor.
#[derive(Debug, Clone)]
pub struct ReducedError {
    /// Reduced residual, `rank` entries.
    pub e: DVector<f64>,
    /// Upper-trapezoidal factor, `rank x 2`.
    pub r1: DMatrix<f64>,
    pub rank: usize,
}

/// Thin-QR reduce a stacked system `(J, e)` with `J` of size N x 2, N >= 2.
pub fn qr_reduce(j: &DMatrix<f64>, e: &DVector<f64>) -> Result<ReducedError, FrontendError> {
    assert_eq!(j.ncols(), 2, "location Jacobian must have two columns");
    assert_eq!(j.nrows(), e.len(), "Jacobian/residual row mismatch");
    if j.nrows() < 2 {
        return Err(FrontendError::TooFewRows { rows: j.nrows() });
    }
    let qr = j.clone().qr();
    let q1 = qr.q(); // N x 2, orthonormal columns
    let r = qr.r(); // 2 x 2 upper triangular

    let svd = r.clone().svd(false, false);
    let s0 = svd.singular_values[0];
    let s1 = svd.singular_values[1];
    if s0 < RANK0_SIGMA {
        return Err(FrontendError::NoGradient);
    }
    let rank = if s1 / s0 < RANK1_RATIO { 1 } else { 2 };
    let reduced = q1.transpose() * e;
    Ok(ReducedError {
        e: DVector::from_fn(rank, |i, _| reduced[i]),
        r1: r.rows(0, rank).into_owned(),
        rank,
    })
}
