//! Linear patch warping between frames.
//!
//! The 2x2 warp chains three Jacobians: pixel-to-bearing of the previous
//! frame, the frame-to-frame bearing transform at the feature's inverse
//! depth, and bearing-to-pixel of the current frame. It predicts how a small
//! pixel neighbourhood deforms under camera motion and both distortions.

use crate::camera::{CameraError, PixelPoint, RefractiveCamera, RefractiveIndex};
use nalgebra::{Matrix2, Matrix3, Rotation3, Unit, Vector3};

/// Frame-to-frame bearing map at fixed inverse depth:
/// `f(mu) = normalize(R mu / rho + t)` with `(R, t)` the transform taking
/// previous-camera coordinates into current-camera coordinates.
pub fn transform_bearing(
    rotation: &Rotation3<f64>,
    translation: &Vector3<f64>,
    bearing: &Unit<Vector3<f64>>,
    rho: f64,
) -> (Unit<Vector3<f64>>, f64) {
    let p = rotation * (bearing.into_inner() / rho) + translation;
    let norm = p.norm();
    (Unit::new_normalize(p), 1.0 / norm)
}

/// Jacobian of [`transform_bearing`] with respect to the bearing (as a free
/// 3-vector): `(I - f f^T) / |p| * R / rho`.
pub fn transform_bearing_jacobian(
    rotation: &Rotation3<f64>,
    translation: &Vector3<f64>,
    bearing: &Unit<Vector3<f64>>,
    rho: f64,
) -> Matrix3<f64> {
    let p = rotation * (bearing.into_inner() / rho) + translation;
    let norm = p.norm();
    let f = p / norm;
    (Matrix3::identity() - f * f.transpose()) * rotation.matrix() / (rho * norm)
}

/// Linear warp of a patch from the previous frame into the current one.
///
/// `bearing_prev` and `u_prev` locate the feature in the previous frame;
/// `rho` is its inverse distance there.
pub fn compute_warp(
    cam: &RefractiveCamera,
    n: RefractiveIndex,
    rotation: &Rotation3<f64>,
    translation: &Vector3<f64>,
    bearing_prev: &Unit<Vector3<f64>>,
    rho: f64,
    u_prev: PixelPoint,
) -> Result<Matrix2<f64>, CameraError> {
    let j_unproj = cam.unproject_jacobian(n, u_prev)?;
    let j_motion = transform_bearing_jacobian(rotation, translation, bearing_prev, rho);
    let (bearing_cur, _) = transform_bearing(rotation, translation, bearing_prev, rho);
    let (j_proj, _) = cam.project_jacobians(n, &bearing_cur.into_inner())?;
    Ok(j_proj * j_motion * j_unproj)
}
