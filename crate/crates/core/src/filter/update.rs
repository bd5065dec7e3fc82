//! Iterated photometric measurement update.
//!
//! Each visible landmark contributes its QR-reduced photometric error and the
//! Jacobian rows chaining the triangular factor through the projection
//! Jacobians: two columns for the bearing tangent and one for the refractive
//! index, the latter scaled by the sensitivity weight. The update relinearizes
//! at successive posterior iterates (Gauss-Newton on the MAP cost) and applies
//! the covariance once, in Joseph form, at the final iterate.

use super::state::{feature_index, FilterCovariance, FilterState, IDX_N};
use crate::camera::{CameraError, PixelPoint, RefractiveCamera, RefractiveIndex};
use crate::frontend::{qr_reduce, stack_and_linearize, FrontendError, ImagePyramid, MultiLevelPatch};
use crate::math::{skew, tangent_basis};
use nalgebra::{DMatrix, DVector, Matrix2};

/// 99.9% chi-square gates for 1 and 2 degrees of freedom.
const CHI2_999: [f64; 2] = [10.827566170662733, 13.815510557964274];

/// IEKF iteration caps and state clamps.
#[derive(Debug, Clone, Copy)]
pub struct UpdateConfig {
    pub max_iterations: usize,
    pub step_tol: f64,
    pub sigma_intensity: f64,
    /// Refractive index clamp applied after the update.
    pub n_bounds: (f64, f64),
    /// Smallest admissible inverse distance (features further than 1 km are
    /// outside any plausible tank).
    pub rho_min: f64,
    /// Mahalanobis gating of per-feature innovations.
    pub gate: bool,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            step_tol: 1e-4,
            sigma_intensity: 2.0,
            n_bounds: (1.0, 2.0),
            rho_min: 1e-3,
            gate: true,
        }
    }
}

/// Per-frame appearance data of one landmark, supplied by the tracker.
pub struct FeatureObservation<'a> {
    pub patch: &'a MultiLevelPatch,
    pub warp: Matrix2<f64>,
    /// Sensitivity weight on the refractive-index Jacobian column.
    pub weight: f64,
}

/// Reduced innovation of one landmark at the current iterate.
#[derive(Debug, Clone)]
pub struct FeatureInnovation {
    pub y: DVector<f64>,
    /// rank x 2 block on the bearing tangent coordinates.
    pub h_bearing: DMatrix<f64>,
    /// rank-vector on the refractive index (already weight-scaled).
    pub h_n: DVector<f64>,
    /// The same column before sensitivity scaling; the suppressed part
    /// `(1 - v) h_n_raw` is treated as a consider term in the innovation
    /// covariance rather than silently discarded.
    pub h_n_raw: DVector<f64>,
    /// Sensitivity weight the scaling used.
    pub weight: f64,
    pub rank: usize,
    pub predicted_pixel: PixelPoint,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InnovationError {
    #[error("projection failed: {0}")]
    Projection(#[from] CameraError),
    #[error("photometric stack failed: {0}")]
    Stack(#[from] FrontendError),
}

/// How each landmark fared in one update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureUpdateStatus {
    Used,
    NoObservation,
    ProjectionFailed,
    OutOfView,
    Degenerate,
    Outlier,
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    /// False when no landmark contributed; state and covariance are untouched.
    pub applied: bool,
    pub iterations: usize,
    pub statuses: Vec<FeatureUpdateStatus>,
}

/// Reduced innovation and Jacobian rows of landmark `index` evaluated at the
/// supplied state iterate.
pub fn feature_innovation(
    cam: &RefractiveCamera,
    state: &FilterState,
    index: usize,
    obs: &FeatureObservation,
    pyr: &ImagePyramid,
) -> Result<FeatureInnovation, InnovationError> {
    let feat = &state.features[index];
    let n = RefractiveIndex::new(state.n.max(1.0));
    let bearing = feat.bearing.into_inner();
    let predicted = cam.project(n, &bearing)?;
    let (j, e) = stack_and_linearize(obs.patch, pyr, predicted, &obs.warp)?;
    let reduced = qr_reduce(&j, &e)?;
    let (du_dp, du_dn) = cam.project_jacobians(n, &bearing)?;
    let basis = tangent_basis(&feat.bearing);
    let dmu_dtangent = -skew(&bearing) * basis; // 3x2
    let du_dtangent = du_dp * dmu_dtangent; // 2x2
    let h_bearing = &reduced.r1 * DMatrix::from_fn(2, 2, |r, c| du_dtangent[(r, c)]);
    let h_n_raw = DVector::from(&reduced.r1 * du_dn);
    let h_n = DVector::from_fn(reduced.rank, |i, _| obs.weight * h_n_raw[i]);
    Ok(FeatureInnovation {
        y: reduced.e,
        h_bearing,
        h_n,
        h_n_raw,
        weight: obs.weight,
        rank: reduced.rank,
        predicted_pixel: predicted,
    })
}

/// Iterated EKF update over all observed landmarks.
///
/// Landmarks whose innovation fails (projection domain, warped patch out of
/// view, no gradient) are skipped for this frame; gated outliers are excluded
/// from every iterate. With no usable landmark the state and covariance are
/// returned untouched, bit for bit.
pub fn iterated_update(
    cam: &RefractiveCamera,
    state: &mut FilterState,
    cov: &mut FilterCovariance,
    pyr: &ImagePyramid,
    observations: &[Option<FeatureObservation>],
    cfg: &UpdateConfig,
) -> UpdateOutcome {
    let dim = state.dim();
    let num_features = state.features.len();
    assert_eq!(observations.len(), num_features, "one observation slot per landmark");

    let mut statuses = vec![FeatureUpdateStatus::NoObservation; num_features];
    let mut excluded = vec![false; num_features];
    let prior = state.clone();
    let mut x_i = DVector::<f64>::zeros(dim);
    let mut iterate = prior.clone();
    let mut final_kh: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut iterations = 0;
    let r_var = cfg.sigma_intensity * cfg.sigma_intensity;
    let sigma_nn = cov.matrix[(IDX_N, IDX_N)].max(0.0);

    for iter in 0..cfg.max_iterations {
        // Collect innovations at the current iterate.
        let mut blocks: Vec<(usize, FeatureInnovation)> = Vec::new();
        for (j, slot) in observations.iter().enumerate() {
            if excluded[j] {
                continue;
            }
            let Some(obs) = slot else { continue };
            match feature_innovation(cam, &iterate, j, obs, pyr) {
                Ok(inn) => blocks.push((j, inn)),
                Err(InnovationError::Projection(_)) => {
                    statuses[j] = FeatureUpdateStatus::ProjectionFailed;
                    excluded[j] = true;
                }
                Err(InnovationError::Stack(FrontendError::AllLevelsOutOfBounds)) => {
                    statuses[j] = FeatureUpdateStatus::OutOfView;
                    excluded[j] = true;
                }
                Err(InnovationError::Stack(_)) => {
                    statuses[j] = FeatureUpdateStatus::Degenerate;
                    excluded[j] = true;
                }
            }
        }
        if blocks.is_empty() {
            return UpdateOutcome { applied: false, iterations, statuses };
        }

        // Gate on the first linearization only: the prior is the reference.
        if iter == 0 && cfg.gate {
            let mut kept = Vec::with_capacity(blocks.len());
            for (j, inn) in blocks {
                let h_j = assemble_rows(&[(j, inn.clone())], dim, num_features);
                let s_j = &h_j * &cov.matrix * h_j.transpose()
                    + consider_block(&inn, r_var, sigma_nn);
                let m = match s_j.clone().cholesky() {
                    Some(ch) => inn.y.dot(&ch.solve(&inn.y)),
                    None => f64::MAX,
                };
                if m > CHI2_999[inn.rank - 1] {
                    statuses[j] = FeatureUpdateStatus::Outlier;
                    excluded[j] = true;
                } else {
                    kept.push((j, inn));
                }
            }
            blocks = kept;
            if blocks.is_empty() {
                return UpdateOutcome { applied: false, iterations, statuses };
            }
        }

        for (j, _) in &blocks {
            statuses[*j] = FeatureUpdateStatus::Used;
        }

        let h = assemble_rows(&blocks, dim, num_features);
        let y = DVector::from_iterator(
            blocks.iter().map(|(_, inn)| inn.rank).sum(),
            blocks.iter().flat_map(|(_, inn)| inn.y.iter().copied()),
        );
        let rows = h.nrows();
        // Block-diagonal measurement covariance: white intensity noise plus
        // the consider inflation for the suppressed refractive sensitivity.
        let mut r_big = DMatrix::zeros(rows, rows);
        {
            let mut row0 = 0;
            for (_, inn) in &blocks {
                r_big
                    .view_mut((row0, row0), (inn.rank, inn.rank))
                    .copy_from(&consider_block(inn, r_var, sigma_nn));
                row0 += inn.rank;
            }
        }
        let s = &h * &cov.matrix * h.transpose() + &r_big;
        let Some(chol) = s.cholesky() else {
            // Numerically degenerate measurement; leave the state alone.
            return UpdateOutcome { applied: false, iterations, statuses };
        };
        // K = Sigma H^T S^-1 computed as (S^-1 (H Sigma))^T.
        let h_sigma = &h * &cov.matrix;
        let k = chol.solve(&h_sigma).transpose();

        let x_next = &k * (&h * &x_i - &y);
        let step = (&x_next - &x_i).norm();
        if std::env::var_os("REFVIO_UPDATE_TRACE").is_some() {
            let seg = |i: usize| {
                (x_next[i] * x_next[i] + x_next[i + 1] * x_next[i + 1]
                    + x_next[i + 2] * x_next[i + 2])
                    .sqrt()
            };
            eprintln!(
                "  it{iter}: rows={} |y|={:.3} |dr|={:.4} |dq|={:.5} |dv|={:.4} |dbw|={:.5} |dn|={:.5} step={:.5}",
                rows,
                y.norm(),
                seg(0),
                seg(3),
                seg(6),
                seg(12),
                x_next[IDX_N].abs(),
                step
            );
        }
        iterate = prior.boxplus(&x_next);
        x_i = x_next;
        final_kh = Some((k, h, r_big));
        iterations = iter + 1;
        if step < cfg.step_tol {
            break;
        }
    }

    let Some((k, h, r_big)) = final_kh else {
        return UpdateOutcome { applied: false, iterations, statuses };
    };

    // Joseph-form covariance at the final linearization.
    let ikh = DMatrix::<f64>::identity(dim, dim) - &k * &h;
    let mut sigma = &ikh * &cov.matrix * ikh.transpose();
    sigma += &k * &r_big * k.transpose();
    cov.matrix = sigma;
    cov.symmetrize();

    *state = iterate;
    state.n = state.n.clamp(cfg.n_bounds.0, cfg.n_bounds.1);
    for f in &mut state.features {
        f.rho = f.rho.max(cfg.rho_min);
    }
    state.renormalize();
    UpdateOutcome { applied: true, iterations, statuses }
}

/// Per-feature measurement covariance: white intensity noise plus the
/// consider term for the suppressed part of the refractive-index
/// sensitivity, `(1 - v)^2 h_raw Var(n) h_raw^T`. The sensitivity heuristic
/// scales the Jacobian column the filter uses; pretending the remainder does
/// not exist would let repeated reads of the same landmarks manufacture
/// refractive-index information out of nothing.
fn consider_block(inn: &FeatureInnovation, r_var: f64, sigma_nn: f64) -> DMatrix<f64> {
    let k = (1.0 - inn.weight) * (1.0 - inn.weight) * sigma_nn;
    let mut r = DMatrix::identity(inn.rank, inn.rank) * r_var;
    for a in 0..inn.rank {
        for b in 0..inn.rank {
            r[(a, b)] += k * inn.h_n_raw[a] * inn.h_n_raw[b];
        }
    }
    r
}

/// Scatter per-feature innovation rows into the full error-state width.
fn assemble_rows(
    blocks: &[(usize, FeatureInnovation)],
    dim: usize,
    _num_features: usize,
) -> DMatrix<f64> {
    let total: usize = blocks.iter().map(|(_, inn)| inn.rank).sum();
    let mut h = DMatrix::zeros(total, dim);
    let mut row = 0;
    for (j, inn) in blocks {
        let base = feature_index(*j);
        for r in 0..inn.rank {
            h[(row + r, base)] = inn.h_bearing[(r, 0)];
            h[(row + r, base + 1)] = inn.h_bearing[(r, 1)];
            h[(row + r, IDX_N)] = inn.h_n[r];
        }
        row += inn.rank;
    }
    h
}
