//! Flat-port refractive camera model.
//!
//! Projection composes three stages: perspective division onto the unit-depth
//! plane, a radial refraction gain derived from Snell's law at a thin flat
//! port, and an equidistant fisheye lens polynomial, followed by the pinhole
//! intrinsics. All stages come with analytic Jacobians with respect to both
//! the 3D point and the refractive index, so the model can sit inside an
//! iterative estimator. The lens and intrinsics are calibrated in air; the
//! refractive index is supplied per call.

mod equidistant;
mod model;
mod rectify;
mod refraction;

pub use equidistant::EquidistantParams;
pub use model::RefractiveCamera;
pub use rectify::{rectification_map, RectifyMap};
pub use refraction::{
    refract_forward, refract_inverse, refract_jacobian_n, refract_jacobian_point,
    refraction_gain_from_air, refraction_gain_from_refracted, CRITICAL_H_MARGIN,
};

use nalgebra::{Matrix2x3, Vector2, Vector3};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        assert!(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
        Self { fx, fy, cx, cy }
    }
}

/// Refractive index of the medium in front of the port. Media of interest
/// satisfy `n >= 1` (air is exactly 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RefractiveIndex(pub f64);

impl RefractiveIndex {
    pub const AIR: RefractiveIndex = RefractiveIndex(1.0);
    pub const WATER: RefractiveIndex = RefractiveIndex(1.33);

    pub fn new(n: f64) -> Self {
        assert!(n >= 1.0, "refractive index below 1 is outside the model");
        Self(n)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Point on the plane at unit distance along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedPoint {
    pub x: f64,
    pub y: f64,
}

impl NormalizedPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn radius(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    #[inline]
    pub fn as_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// Pixel coordinates. May lie outside the image bounds; bounds checking is
/// the caller's job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    #[inline]
    pub fn as_vector(self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }
}

/// Camera-model failure modes. Estimator code treats all of them as
/// "landmark not visible from this state".
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CameraError {
    #[error("point at or behind the camera plane (pz = {pz})")]
    BehindCamera { pz: f64 },
    #[error("ray beyond the refractive field of view (h = {h})")]
    BeyondCriticalAngle { h: f64 },
    #[error("lens undistortion did not converge after {iterations} iterations (residual {residual})")]
    UndistortDiverged { iterations: u32, residual: f64 },
}

/// Projection onto the plane at unit distance: `(px/pz, py/pz)`.
pub fn project_plane(p: &Vector3<f64>) -> Result<NormalizedPoint, CameraError> {
    if p.z <= 0.0 {
        return Err(CameraError::BehindCamera { pz: p.z });
    }
    Ok(NormalizedPoint::new(p.x / p.z, p.y / p.z))
}

/// Jacobian of [`project_plane`] with respect to the 3D point.
pub fn project_plane_jacobian(p: &Vector3<f64>) -> Result<Matrix2x3<f64>, CameraError> {
    if p.z <= 0.0 {
        return Err(CameraError::BehindCamera { pz: p.z });
    }
    let iz = 1.0 / p.z;
    let iz2 = iz * iz;
    Ok(Matrix2x3::new(iz, 0.0, -p.x * iz2, 0.0, iz, -p.y * iz2))
}
