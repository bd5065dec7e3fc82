//! Epipolar sensitivity heuristic for the refractive-index Jacobian.
//!
//! Refractive-index estimation degrades when a landmark's apparent image
//! motion is radial or tangential with respect to the image center. The
//! heuristic scores each landmark by the angle between its epipolar direction
//! (in pixel coordinates, respecting both distortions) and its radial
//! direction, `v = |sin 2 theta|^q * r^k`, and the filter scales the
//! refractive-index Jacobian column by `v`.

use crate::camera::{PixelPoint, RefractiveCamera, RefractiveIndex};
use crate::math::skew;
use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};

/// Frame-to-frame rigid camera motion, current-from-previous.
#[derive(Debug, Clone, Copy)]
pub struct RelativeMotion {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl RelativeMotion {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vector3::zeros() }
    }

    /// Compose `self` after `earlier` (both current-from-previous).
    pub fn compose_after(&self, earlier: &RelativeMotion) -> RelativeMotion {
        RelativeMotion {
            rotation: self.rotation * earlier.rotation,
            translation: self.rotation * earlier.translation + self.translation,
        }
    }

    /// Rotation magnitude in radians.
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }
}

/// Exponents of the heuristic; both constrained to (0, 1].
#[derive(Debug, Clone, Copy)]
pub struct HeuristicParams {
    /// Exponent on `|sin 2 theta|`.
    pub q: f64,
    /// Exponent on the normalized radial distance.
    pub k: f64,
    /// Frame-to-frame rotation (radians) above which the small-rotation
    /// premise of the epipolar approximation is flagged; the weight is still
    /// computed.
    pub rotation_warn: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self { q: 0.5, k: 0.8, rotation_warn: 2.0f64.to_radians() }
    }
}

impl HeuristicParams {
    pub fn new(q: f64, k: f64) -> Self {
        assert!(q > 0.0 && q <= 1.0, "q must be in (0, 1]");
        assert!(k > 0.0 && k <= 1.0, "k must be in (0, 1]");
        Self { q, k, ..Self::default() }
    }

    /// True when the frame-to-frame rotation is small enough for the
    /// epipolar-line approximation of landmark motion.
    pub fn small_rotation(&self, motion: &RelativeMotion) -> bool {
        motion.rotation_angle() <= self.rotation_warn
    }
}

/// Translation below which the epipolar geometry is degenerate and all
/// weights collapse to zero for the frame.
pub const DEGENERATE_TRANSLATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensitivityError {
    #[error("translation magnitude {t} m is too small for epipolar geometry")]
    DegenerateTranslation { t: f64 },
}

/// Essential matrix `E = [t]x R` of a relative motion.
pub fn essential_matrix(motion: &RelativeMotion) -> Result<Matrix3<f64>, SensitivityError> {
    let t = motion.translation.norm();
    if t < DEGENERATE_TRANSLATION {
        return Err(SensitivityError::DegenerateTranslation { t });
    }
    Ok(skew(&motion.translation) * motion.rotation.matrix())
}

/// Core heuristic formula on the angle between epipolar and radial
/// directions and the normalized radial distance `r` in [0, 1].
pub fn weight_from_angle(theta: f64, r: f64, params: &HeuristicParams) -> f64 {
    (2.0 * theta).sin().abs().powf(params.q) * r.powf(params.k)
}

/// Heuristic weight of one landmark.
///
/// The epipolar line `lambda = E^T bearing` lives on the unit-depth plane;
/// its direction at the landmark is mapped to pixel coordinates by projecting
/// two nearby points through the full refractive+lens model and differencing.
/// `half_diagonal` normalizes the radial pixel distance into [0, 1].
#[allow(clippy::too_many_arguments)]
pub fn heuristic_weight(
    cam: &RefractiveCamera,
    n: RefractiveIndex,
    essential: &Matrix3<f64>,
    bearing: &Unit<Vector3<f64>>,
    u: PixelPoint,
    center: PixelPoint,
    half_diagonal: f64,
    params: &HeuristicParams,
) -> f64 {
    let radial = Vector2::new(u.u - center.u, u.v - center.v);
    let radius = radial.norm();
    if radius < 1e-9 {
        return 0.0;
    }
    let lambda = essential.transpose() * bearing.into_inner();
    let line_dir = Vector2::new(-lambda.y, lambda.x);
    if line_dir.norm() < 1e-12 {
        // Feature at (or numerically indistinguishable from) the epipole.
        return 0.0;
    }
    let dir = line_dir / line_dir.norm();
    if bearing.z <= 1e-6 {
        return 0.0;
    }
    // Walk a small step along the line on the unit-depth plane and observe
    // the pixel displacement under the full model.
    let p0 = Vector3::new(bearing.x / bearing.z, bearing.y / bearing.z, 1.0);
    let step = 1e-4;
    let p1 = Vector3::new(p0.x + step * dir.x, p0.y + step * dir.y, 1.0);
    let (u0, u1) = match (cam.project(n, &p0), cam.project(n, &p1)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return 0.0,
    };
    let epi_px = Vector2::new(u1.u - u0.u, u1.v - u0.v);
    if epi_px.norm() < 1e-12 {
        return 0.0;
    }
    let cos_theta = (epi_px / epi_px.norm()).dot(&(radial / radius)).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let r_norm = (radius / half_diagonal).min(1.0);
    weight_from_angle(theta, r_norm, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{EquidistantParams, Intrinsics};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    #[test]
    fn essential_matrix_of_pure_x_translation() {
        let motion = RelativeMotion {
            rotation: Rotation3::identity(),
            translation: Vector3::new(1.0, 0.0, 0.0),
        };
        let e = essential_matrix(&motion).unwrap();
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_relative_eq!(e, expected, epsilon = 1e-15);
    }

    #[test]
    fn epipolar_constraint_holds_for_synthetic_correspondences() {
        let motion = RelativeMotion {
            rotation: Rotation3::from_scaled_axis(Vector3::new(0.02, -0.01, 0.03)),
            translation: Vector3::new(0.1, -0.05, 0.02),
        };
        let e = essential_matrix(&motion).unwrap();
        for p in [
            Vector3::new(0.4, -0.2, 2.0),
            Vector3::new(-0.6, 0.3, 1.5),
            Vector3::new(0.05, 0.8, 3.0),
        ] {
            let p2 = motion.rotation * p + motion.translation;
            let residual = p2.normalize().dot(&(e * p.normalize()));
            assert!(residual.abs() < 1e-14, "epipolar residual {residual}");
        }
    }

    #[test]
    fn essential_matrix_has_rank_two() {
        let motion = RelativeMotion {
            rotation: Rotation3::from_scaled_axis(Vector3::new(0.1, 0.2, -0.05)),
            translation: Vector3::new(0.3, 0.1, -0.2),
        };
        let e = essential_matrix(&motion).unwrap();
        let svd = e.svd(false, false);
        assert!(svd.singular_values[1] > 1e-6);
        assert!(svd.singular_values[2] < 1e-12);
    }

    #[test]
    fn degenerate_translation_flagged() {
        let motion = RelativeMotion {
            rotation: Rotation3::from_scaled_axis(Vector3::new(0.1, 0.0, 0.0)),
            translation: Vector3::new(1e-8, 0.0, 0.0),
        };
        assert!(matches!(
            essential_matrix(&motion),
            Err(SensitivityError::DegenerateTranslation { .. })
        ));
        assert!(!HeuristicParams::default().small_rotation(&RelativeMotion {
            rotation: Rotation3::from_scaled_axis(Vector3::new(0.1, 0.0, 0.0)),
            translation: Vector3::zeros(),
        }));
    }

    #[test]
    fn formula_values() {
        let params = HeuristicParams::new(0.5, 0.8);
        assert_relative_eq!(weight_from_angle(FRAC_PI_4, 1.0, &params), 1.0, epsilon = 1e-14);
        assert_eq!(weight_from_angle(0.0, 1.0, &params), 0.0);
        // sin(pi) rounds to ~1e-16 and the 0.5 exponent amplifies it to ~1e-8.
        assert!(weight_from_angle(FRAC_PI_2, 0.7, &params) < 1e-7);
        let v = weight_from_angle(FRAC_PI_8, 0.5, &params);
        assert_relative_eq!(
            v,
            FRAC_PI_4.sin().sqrt() * 0.5f64.powf(0.8),
            epsilon = 1e-14
        );
        assert!((v - 0.4830).abs() < 1e-4);
    }

    #[test]
    fn weight_symmetries_and_bounds() {
        let params = HeuristicParams::new(0.5, 0.8);
        for theta in [0.1, 0.4, 1.0, 1.4] {
            for r in [0.2, 0.5, 1.0] {
                let v = weight_from_angle(theta, r, &params);
                assert!(v >= 0.0 && v <= r.powf(params.k) + 1e-15);
                assert_relative_eq!(v, weight_from_angle(PI - theta, r, &params), epsilon = 1e-12);
                assert_relative_eq!(v, weight_from_angle(-theta, r, &params), epsilon = 1e-12);
            }
        }
    }

    fn camera() -> RefractiveCamera {
        RefractiveCamera::new(
            Intrinsics::new(140.0, 140.0, 160.0, 128.0),
            EquidistantParams::zero(),
        )
    }

    #[test]
    fn weight_invariant_to_translation_scale() {
        let cam = camera();
        let n = RefractiveIndex(1.33);
        let motion = |s: f64| RelativeMotion {
            rotation: Rotation3::from_scaled_axis(Vector3::new(0.005, -0.004, 0.003)),
            translation: s * Vector3::new(0.05, 0.02, -0.01),
        };
        let bearing = cam.unproject(n, PixelPoint::new(230.0, 180.0)).unwrap();
        let u = cam.project(n, &bearing.into_inner()).unwrap();
        let center = PixelPoint::new(160.0, 128.0);
        let hd = (160.0f64 * 160.0 + 128.0 * 128.0).sqrt();
        let params = HeuristicParams::default();
        let e1 = essential_matrix(&motion(1.0)).unwrap();
        let e2 = essential_matrix(&motion(7.5)).unwrap();
        let v1 = heuristic_weight(&cam, n, &e1, &bearing, u, center, hd, &params);
        let v2 = heuristic_weight(&cam, n, &e2, &bearing, u, center, hd, &params);
        assert_relative_eq!(v1, v2, epsilon = 1e-12);
        assert!(v1 > 0.0);
    }

    #[test]
    fn radial_epipolar_direction_zeroes_the_weight() {
        // Pure z-translation: the epipole is the image center and every
        // epipolar line is radial, so v = 0 everywhere.
        let cam = camera();
        let n = RefractiveIndex(1.33);
        let motion = RelativeMotion {
            rotation: Rotation3::identity(),
            translation: Vector3::new(0.0, 0.0, 0.1),
        };
        let e = essential_matrix(&motion).unwrap();
        let center = PixelPoint::new(160.0, 128.0);
        let hd = (160.0f64 * 160.0 + 128.0 * 128.0).sqrt();
        let params = HeuristicParams::default();
        for px in [
            PixelPoint::new(220.0, 128.0),
            PixelPoint::new(160.0, 40.0),
            PixelPoint::new(230.0, 190.0),
        ] {
            let bearing = cam.unproject(n, px).unwrap();
            let u = cam.project(n, &bearing.into_inner()).unwrap();
            let v = heuristic_weight(&cam, n, &e, &bearing, u, center, hd, &params);
            assert!(v < 2e-2, "radial motion should give near-zero weight, got {v}");
        }
    }

    #[test]
    fn feature_at_center_gets_zero_weight() {
        let cam = camera();
        let n = RefractiveIndex(1.33);
        let motion = RelativeMotion {
            rotation: Rotation3::identity(),
            translation: Vector3::new(0.1, 0.0, 0.0),
        };
        let e = essential_matrix(&motion).unwrap();
        let center = PixelPoint::new(160.0, 128.0);
        let bearing = cam.unproject(n, center).unwrap();
        let v = heuristic_weight(
            &cam,
            n,
            &e,
            &bearing,
            center,
            center,
            200.0,
            &HeuristicParams::default(),
        );
        assert_eq!(v, 0.0);
    }
}
