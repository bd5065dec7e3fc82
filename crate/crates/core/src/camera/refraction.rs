//! Radial refraction gain of a thin flat port.
//!
//! A ray arriving from the medium at incidence angle `theta_mu` (radius `r`
//! on the unit-depth plane, `tan(theta_mu) = r`) is bent by Snell's law into
//! angle `theta_alpha` with `sin(theta_alpha) = n sin(theta_mu)`. In
//! normalized coordinates this is a purely radial gain `m` with
//! `r_refracted = m(n, r) * r`. The gain has two algebraically equivalent
//! closed forms, one in the medium-side radius and one in the refracted
//! radius, which makes both the forward and the inverse map cheap.

use super::{CameraError, NormalizedPoint, RefractiveIndex};
use nalgebra::{Matrix2, Vector2};

/// Rays with `h = 1 + r^2 (1 - n^2)` below this margin are rejected: they sit
/// at (or numerically too close to) the critical incidence angle
/// `asin(1/n)`, where the forward map and its Jacobians blow up.
pub const CRITICAL_H_MARGIN: f64 = 1e-9;

#[inline]
pub(crate) fn h_term(n: f64, r2: f64) -> f64 {
    // Written as 1 + r^2 (1 - n^2) so that n = 1 yields exactly 1.0 and the
    // whole refraction stage reduces to the identity bit-for-bit.
    1.0 + r2 * (1.0 - n * n)
}

/// Refraction gain in terms of the medium-side radius:
/// `m(n, r) = n / sqrt(1 + r^2 - n^2 r^2)`.
pub fn refraction_gain_from_air(n: RefractiveIndex, r: f64) -> Result<f64, CameraError> {
    let h = h_term(n.0, r * r);
    if h < CRITICAL_H_MARGIN {
        return Err(CameraError::BeyondCriticalAngle { h });
    }
    Ok(n.0 / h.sqrt())
}

/// Refraction gain in terms of the refracted radius:
/// `m(n, r_r) = sqrt(n^2 r_r^2 + n^2 - r_r^2)`.
///
/// For `n >= 1` this is defined for every `r_r`, which makes the inverse
/// (undistortion) map total.
pub fn refraction_gain_from_refracted(n: RefractiveIndex, r_r: f64) -> f64 {
    let n2 = n.0 * n.0;
    (n2 + r_r * r_r * (n2 - 1.0)).sqrt()
}

/// Forward (distortion) map on the unit-depth plane: `p_r = m(n, |p|) p`.
pub fn refract_forward(
    n: RefractiveIndex,
    p: NormalizedPoint,
) -> Result<NormalizedPoint, CameraError> {
    let m = refraction_gain_from_air(n, p.radius())?;
    Ok(NormalizedPoint::new(m * p.x, m * p.y))
}

/// Inverse (undistortion) map: `p = p_r / m(n, |p_r|)`. Exact inverse of
/// [`refract_forward`] on its domain; total for `n >= 1`.
pub fn refract_inverse(n: RefractiveIndex, p_r: NormalizedPoint) -> NormalizedPoint {
    let m = refraction_gain_from_refracted(n, p_r.radius());
    NormalizedPoint::new(p_r.x / m, p_r.y / m)
}

/// Jacobian of the forward map with respect to the refractive index,
/// `d p_r / d n = p (h + n^2 r^2) / h^(3/2)`.
pub fn refract_jacobian_n(
    n: RefractiveIndex,
    p: NormalizedPoint,
) -> Result<Vector2<f64>, CameraError> {
    let r2 = p.x * p.x + p.y * p.y;
    let h = h_term(n.0, r2);
    if h < CRITICAL_H_MARGIN {
        return Err(CameraError::BeyondCriticalAngle { h });
    }
    let dm_dn = (h + n.0 * n.0 * r2) / (h * h.sqrt());
    Ok(Vector2::new(p.x * dm_dn, p.y * dm_dn))
}

/// Jacobian of the forward map with respect to the normalized point:
/// `m I + n (n^2 - 1) / h^(3/2) * p p^T` (symmetric).
pub fn refract_jacobian_point(
    n: RefractiveIndex,
    p: NormalizedPoint,
) -> Result<Matrix2<f64>, CameraError> {
    let r2 = p.x * p.x + p.y * p.y;
    let h = h_term(n.0, r2);
    if h < CRITICAL_H_MARGIN {
        return Err(CameraError::BeyondCriticalAngle { h });
    }
    let sqrt_h = h.sqrt();
    let m = n.0 / sqrt_h;
    let s = n.0 * (n.0 * n.0 - 1.0) / (h * sqrt_h);
    Ok(Matrix2::new(
        m + s * p.x * p.x,
        s * p.x * p.y,
        s * p.x * p.y,
        m + s * p.y * p.y,
    ))
}
