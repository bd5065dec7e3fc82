//! Equidistant (fisheye) lens distortion.
//!
//! The model maps the radius on the unit-depth plane through the incidence
//! angle `theta = atan(r)` and an odd polynomial
//! `theta_e = theta (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8)`,
//! then scales the point by `theta_e / r`. The scale has a removable
//! singularity at `r = 0` which is evaluated by series expansion.

use super::{CameraError, NormalizedPoint};
use nalgebra::Matrix2;

/// Radii below this use the series expansion of `theta_e / r` and its
/// derivative instead of the 0/0-prone closed form.
const SERIES_RADIUS: f64 = 1e-6;

/// Newton iteration budget and tolerance for [`EquidistantParams::undistort`].
const UNDISTORT_MAX_ITER: u32 = 20;
const UNDISTORT_TOL: f64 = 1e-12;

/// Equidistant lens polynomial coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EquidistantParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl EquidistantParams {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64) -> Self {
        Self { k1, k2, k3, k4 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    #[inline]
    fn theta_e(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        theta * (1.0 + t2 * (self.k1 + t2 * (self.k2 + t2 * (self.k3 + t2 * self.k4))))
    }

    #[inline]
    fn theta_e_deriv(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        1.0 + t2 * (3.0 * self.k1 + t2 * (5.0 * self.k2 + t2 * (7.0 * self.k3 + t2 * 9.0 * self.k4)))
    }

    /// `theta_e(atan(r)) / r` with its removable singularity handled:
    /// series `1 + (k1 - 1/3) r^2 + (1/5 - k1 + k2) r^4` near zero.
    fn radial_scale(&self, r: f64) -> f64 {
        if r < SERIES_RADIUS {
            let a = self.k1 - 1.0 / 3.0;
            let b = 0.2 - self.k1 + self.k2;
            let r2 = r * r;
            1.0 + r2 * (a + b * r2)
        } else {
            self.theta_e(r.atan()) / r
        }
    }

    /// Forward lens distortion on the unit-depth plane.
    pub fn distort(&self, p: NormalizedPoint) -> NormalizedPoint {
        let s = self.radial_scale(p.radius());
        NormalizedPoint::new(s * p.x, s * p.y)
    }

    /// Jacobian of [`Self::distort`]: the diagonal radial scale plus the two
    /// chain-rule rank-one terms through `r` and `theta`.
    pub fn distort_jacobian(&self, p: NormalizedPoint) -> Matrix2<f64> {
        let r = p.radius();
        if r < SERIES_RADIUS {
            // J = g(r) I + (g'(r)/r) p p^T with g the series radial scale.
            let a = self.k1 - 1.0 / 3.0;
            let b = 0.2 - self.k1 + self.k2;
            let r2 = r * r;
            let g = 1.0 + r2 * (a + b * r2);
            let gp_over_r = 2.0 * a + 4.0 * b * r2;
            return Matrix2::new(
                g + gp_over_r * p.x * p.x,
                gp_over_r * p.x * p.y,
                gp_over_r * p.x * p.y,
                g + gp_over_r * p.y * p.y,
            );
        }
        let theta = r.atan();
        let te = self.theta_e(theta);
        let dte_dtheta = self.theta_e_deriv(theta);
        let dtheta_dr = 1.0 / (r * r + 1.0);
        let scale = te / r;
        // d(te/r)/dr split into the -te/r^2 and te'(r)/r contributions, each
        // through d r / d p = p^T / r.
        let c = (dte_dtheta * dtheta_dr - scale) / (r * r);
        Matrix2::new(
            scale + c * p.x * p.x,
            c * p.x * p.y,
            c * p.x * p.y,
            scale + c * p.y * p.y,
        )
    }

    /// Invert [`Self::distort`] by Newton iteration on `theta`.
    ///
    /// The equidistant polynomial is near-identity for realistic
    /// coefficients, so `theta = theta_e` is an excellent initial guess;
    /// non-convergence signals an input outside the lens model's image.
    /// Solutions at or past 90 degrees incidence are rejected too: they have
    /// no representation on the unit-depth plane.
    pub fn undistort(&self, p_l: NormalizedPoint) -> Result<NormalizedPoint, CameraError> {
        let r_l = p_l.radius();
        if r_l < 1e-9 {
            return Ok(p_l);
        }
        let theta_e = r_l;
        let mut theta = theta_e;
        let mut residual = f64::MAX;
        for _ in 0..=UNDISTORT_MAX_ITER {
            residual = self.theta_e(theta) - theta_e;
            if residual.abs() < UNDISTORT_TOL {
                if !(0.0..std::f64::consts::FRAC_PI_2 - 1e-9).contains(&theta) {
                    break;
                }
                let r = theta.tan();
                let s = r / r_l;
                return Ok(NormalizedPoint::new(s * p_l.x, s * p_l.y));
            }
            let deriv = self.theta_e_deriv(theta);
            if deriv.abs() < 1e-12 {
                break;
            }
            theta -= residual / deriv;
        }
        Err(CameraError::UndistortDiverged {
            iterations: UNDISTORT_MAX_ITER,
            residual,
        })
    }
}
