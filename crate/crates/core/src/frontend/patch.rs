//! Multi-level intensity patches and direct photometric alignment.
//!
//! A patch stores `side x side` intensities (and their gradients) per pyramid
//! level around a level-0 center pixel, together with per-patch affine
//! illumination scalars `a, b`. The photometric error of a patch against an
//! image compares stored intensities with the image sampled at
//! `center * 0.5^l + D * offset`, where `D` is the accumulated linear warp.

use super::{FrontendError, ImagePyramid};
use crate::camera::PixelPoint;
use crate::image::GrayImage;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

/// Fixed square intensity patch replicated over pyramid levels.
#[derive(Debug, Clone)]
pub struct MultiLevelPatch {
    side: usize,
    center: PixelPoint,
    levels: Vec<PatchLevel>,
    /// Multiplicative illumination gain, estimated during pre-alignment.
    pub a: f64,
    /// Additive illumination offset, estimated during pre-alignment.
    pub b: f64,
}

#[derive(Debug, Clone)]
struct PatchLevel {
    intensity: Vec<f32>,
    grad: Vec<(f32, f32)>,
}

impl MultiLevelPatch {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    /// Level-0 pixel the patch was extracted at.
    pub fn center(&self) -> PixelPoint {
        self.center
    }

    pub fn intensities(&self, level: usize) -> &[f32] {
        &self.levels[level].intensity
    }

    pub fn gradients(&self, level: usize) -> &[(f32, f32)] {
        &self.levels[level].grad
    }

    /// Mean squared gradient magnitude at level 0; a cheap texture score.
    pub fn gradient_energy(&self) -> f64 {
        let g = &self.levels[0].grad;
        g.iter().map(|&(x, y)| (x * x + y * y) as f64).sum::<f64>() / g.len() as f64
    }
}

/// Integer sample offsets of a `side x side` patch around its center.
fn offsets(side: usize) -> impl Iterator<Item = (f64, f64)> {
    let half = (side / 2) as i64;
    (0..side as i64).flat_map(move |dy| {
        (0..side as i64).map(move |dx| ((dx - half) as f64, (dy - half) as f64))
    })
}

fn in_gradient_bounds(img: &GrayImage, x: f64, y: f64) -> bool {
    x >= 1.0 && y >= 1.0 && x <= (img.width() - 2) as f64 && y <= (img.height() - 2) as f64
}

/// Extract a multi-level patch centered at level-0 pixel `u`.
///
/// Intensities are bilinear samples, gradients central differences at the
/// same pyramid level; `a = 1, b = 0` initially. Fails if the footprint
/// (including the gradient stencil) leaves the image at any level.
pub fn extract_patch(
    pyr: &ImagePyramid,
    u: PixelPoint,
    side: usize,
    levels: usize,
) -> Result<MultiLevelPatch, FrontendError> {
    assert!(levels < pyr.levels(), "pyramid too shallow for requested levels");
    let mut out = Vec::with_capacity(levels + 1);
    for l in 0..=levels {
        let img = pyr.level(l);
        let (cx, cy) = (ImagePyramid::to_level(u.u, l), ImagePyramid::to_level(u.v, l));
        let mut intensity = Vec::with_capacity(side * side);
        let mut grad = Vec::with_capacity(side * side);
        for (dx, dy) in offsets(side) {
            let (x, y) = (cx + dx, cy + dy);
            let Some((value, gx, gy)) = img.bicubic_with_gradient(x, y) else {
                return Err(FrontendError::OutOfBounds { level: l });
            };
            intensity.push(value as f32);
            grad.push((gx as f32, gy as f32));
        }
        out.push(PatchLevel { intensity, grad });
    }
    Ok(MultiLevelPatch { side, center: u, levels: out, a: 1.0, b: 0.0 })
}

/// Per-pixel photometric residuals of one pyramid level:
/// `P_l - a * I_l(u * 0.5^l + D * offset) - b`.
///
/// `None` when the warped footprint leaves the level (the level is dropped).
pub fn photometric_error(
    patch: &MultiLevelPatch,
    pyr: &ImagePyramid,
    u: PixelPoint,
    warp: &Matrix2<f64>,
    a: f64,
    b: f64,
    level: usize,
) -> Option<DVector<f64>> {
    let img = pyr.level(level);
    let (cx, cy) = (
        ImagePyramid::to_level(u.u, level),
        ImagePyramid::to_level(u.v, level),
    );
    let stored = patch.intensities(level);
    let mut e = DVector::zeros(stored.len());
    for (i, (dx, dy)) in offsets(patch.side).enumerate() {
        let off = warp * Vector2::new(dx, dy);
        let (x, y) = (cx + off.x, cy + off.y);
        let (sample, _, _) = img.bicubic_with_gradient(x, y)?;
        e[i] = stored[i] as f64 - a * sample - b;
    }
    Some(e)
}

/// Stack photometric errors over all levels that stay in bounds, together
/// with the Jacobian of the stack with respect to the level-0 patch location.
///
/// Rows are `-a * 0.5^l * grad I_l` evaluated at the warped sample points.
pub fn stack_and_linearize(
    patch: &MultiLevelPatch,
    pyr: &ImagePyramid,
    u: PixelPoint,
    warp: &Matrix2<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>), FrontendError> {
    stack_full(patch, pyr, u, warp, patch.a, patch.b).map(|(j, e, _)| (j, e))
}

/// Stacked residuals, location Jacobian and raw image samples under explicit
/// illumination scalars. The samples feed the illumination columns of the
/// pre-alignment normal equations.
fn stack_full(
    patch: &MultiLevelPatch,
    pyr: &ImagePyramid,
    u: PixelPoint,
    warp: &Matrix2<f64>,
    a: f64,
    b: f64,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>), FrontendError> {
    let per_level = patch.side * patch.side;
    let mut rows_j: Vec<[f64; 2]> = Vec::with_capacity(per_level * patch.levels());
    let mut rows_e: Vec<f64> = Vec::with_capacity(per_level * patch.levels());
    let mut rows_s: Vec<f64> = Vec::with_capacity(per_level * patch.levels());
    for l in 0..patch.levels() {
        let img = pyr.level(l);
        let c = ImagePyramid::scale(l);
        let (cx, cy) = (ImagePyramid::to_level(u.u, l), ImagePyramid::to_level(u.v, l));
        let stored = patch.intensities(l);
        let mut level_j = Vec::with_capacity(per_level);
        let mut level_e = Vec::with_capacity(per_level);
        let mut level_s = Vec::with_capacity(per_level);
        let mut ok = true;
        for (i, (dx, dy)) in offsets(patch.side).enumerate() {
            let off = warp * Vector2::new(dx, dy);
            let (x, y) = (cx + off.x, cy + off.y);
            let Some((sample, gx, gy)) = img.bicubic_with_gradient(x, y) else {
                ok = false;
                break;
            };
            level_e.push(stored[i] as f64 - a * sample - b);
            level_j.push([-a * c * gx, -a * c * gy]);
            level_s.push(sample);
        }
        if ok {
            rows_j.extend_from_slice(&level_j);
            rows_e.extend_from_slice(&level_e);
            rows_s.extend_from_slice(&level_s);
        }
    }
    if rows_e.is_empty() {
        return Err(FrontendError::AllLevelsOutOfBounds);
    }
    let n = rows_e.len();
    let mut j = DMatrix::zeros(n, 2);
    let mut e = DVector::zeros(n);
    let mut s = DVector::zeros(n);
    for i in 0..n {
        j[(i, 0)] = rows_j[i][0];
        j[(i, 1)] = rows_j[i][1];
        e[i] = rows_e[i];
        s[i] = rows_s[i];
    }
    Ok((j, e, s))
}

/// Result of Gauss-Newton patch pre-alignment.
#[derive(Debug, Clone, Copy)]
pub struct PrealignResult {
    pub pixel: PixelPoint,
    pub a: f64,
    pub b: f64,
    pub iterations: usize,
    /// Root-mean-square residual at the solution.
    pub rms: f64,
}

const PREALIGN_MAX_ITER: usize = 10;
const PREALIGN_TOL_PX: f64 = 0.01;

/// Align a patch against the pyramid by Gauss-Newton on the pixel location,
/// jointly estimating the illumination scalars `a, b`.
pub fn prealign(
    patch: &MultiLevelPatch,
    pyr: &ImagePyramid,
    u0: PixelPoint,
    warp: &Matrix2<f64>,
) -> Result<PrealignResult, FrontendError> {
    let mut u = u0;
    let mut a = patch.a;
    let mut b = patch.b;
    let mut prev_cost = f64::MAX;
    let mut rising = 0usize;
    for iter in 0..PREALIGN_MAX_ITER {
        let (j_u, e, samples) = stack_full(patch, pyr, u, warp, a, b)?;
        let n = e.len();
        // Augment with the illumination columns: d e / d a = -I, d e / d b = -1.
        let mut aug = DMatrix::zeros(n, 4);
        for r in 0..n {
            aug[(r, 0)] = j_u[(r, 0)];
            aug[(r, 1)] = j_u[(r, 1)];
            aug[(r, 2)] = -samples[r];
            aug[(r, 3)] = -1.0;
        }
        let cost = e.norm();
        if cost > prev_cost {
            rising += 1;
            if rising >= 3 {
                return Err(FrontendError::Diverged { iterations: iter });
            }
        } else {
            rising = 0;
        }
        prev_cost = cost;

        let ata = aug.transpose() * &aug;
        let atb = aug.transpose() * &e;
        let chol = ata.cholesky().ok_or(FrontendError::RankDeficient)?;
        let delta = chol.solve(&(-atb));
        u = PixelPoint::new(u.u + delta[0], u.v + delta[1]);
        a += delta[2];
        b += delta[3];
        if delta.fixed_rows::<2>(0).norm() < PREALIGN_TOL_PX {
            let (_, e, _) = stack_full(patch, pyr, u, warp, a, b)?;
            let rms = (e.norm_squared() / e.len() as f64).sqrt();
            return Ok(PrealignResult { pixel: u, a, b, iterations: iter + 1, rms });
        }
    }
    Err(FrontendError::Diverged { iterations: PREALIGN_MAX_ITER })
}
