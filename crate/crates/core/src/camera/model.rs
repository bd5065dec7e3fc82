//! Combined projection model: plane projection, refraction, lens, intrinsics.

use super::{
    project_plane, project_plane_jacobian, refract_inverse, refract_jacobian_n,
    refract_jacobian_point, refraction_gain_from_air, CameraError, EquidistantParams, Intrinsics,
    NormalizedPoint, PixelPoint, RefractiveIndex,
};
use nalgebra::{Matrix2, Matrix2x3, Matrix3x2, Unit, Vector2, Vector3};

/// In-air calibrated camera: pinhole intrinsics plus equidistant lens.
/// The refractive index of the medium is supplied per call so the same model
/// serves air, water and anything the estimator converges to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefractiveCamera {
    pub intrinsics: Intrinsics,
    pub lens: EquidistantParams,
}

impl RefractiveCamera {
    pub fn new(intrinsics: Intrinsics, lens: EquidistantParams) -> Self {
        Self { intrinsics, lens }
    }

    /// Project a camera-frame point to pixel coordinates under refractive
    /// index `n`. Scale-invariant in `p`, so unit bearing vectors are fine.
    pub fn project(&self, n: RefractiveIndex, p: &Vector3<f64>) -> Result<PixelPoint, CameraError> {
        let pn = project_plane(p)?;
        let m = refraction_gain_from_air(n, pn.radius())?;
        let pr = NormalizedPoint::new(m * pn.x, m * pn.y);
        let pl = self.lens.distort(pr);
        Ok(PixelPoint::new(
            self.intrinsics.fx * pl.x + self.intrinsics.cx,
            self.intrinsics.fy * pl.y + self.intrinsics.cy,
        ))
    }

    /// Jacobians of [`Self::project`] with respect to the point and to the
    /// refractive index. Shares the forward pass intermediates with the
    /// projection itself.
    pub fn project_jacobians(
        &self,
        n: RefractiveIndex,
        p: &Vector3<f64>,
    ) -> Result<(Matrix2x3<f64>, Vector2<f64>), CameraError> {
        let pn = project_plane(p)?;
        let j_plane = project_plane_jacobian(p)?;
        let j_refr_p = refract_jacobian_point(n, pn)?;
        let j_refr_n = refract_jacobian_n(n, pn)?;
        let m = refraction_gain_from_air(n, pn.radius())?;
        let pr = NormalizedPoint::new(m * pn.x, m * pn.y);
        let j_lens = self.lens.distort_jacobian(pr);
        let kf = Matrix2::new(self.intrinsics.fx, 0.0, 0.0, self.intrinsics.fy);
        let du_dp = kf * j_lens * j_refr_p * j_plane;
        let du_dn = kf * j_lens * j_refr_n;
        Ok((du_dp, du_dn))
    }

    /// Unit bearing vector of the ray observed at pixel `u` under `n`.
    pub fn unproject(
        &self,
        n: RefractiveIndex,
        u: PixelPoint,
    ) -> Result<Unit<Vector3<f64>>, CameraError> {
        let pl = NormalizedPoint::new(
            (u.u - self.intrinsics.cx) / self.intrinsics.fx,
            (u.v - self.intrinsics.cy) / self.intrinsics.fy,
        );
        let pr = self.lens.undistort(pl)?;
        let pn = refract_inverse(n, pr);
        Ok(Unit::new_normalize(Vector3::new(pn.x, pn.y, 1.0)))
    }

    /// Jacobian of [`Self::unproject`] with respect to the pixel, by the
    /// inverse-function theorem applied stage by stage.
    pub fn unproject_jacobian(
        &self,
        n: RefractiveIndex,
        u: PixelPoint,
    ) -> Result<Matrix3x2<f64>, CameraError> {
        let pl = NormalizedPoint::new(
            (u.u - self.intrinsics.cx) / self.intrinsics.fx,
            (u.v - self.intrinsics.cy) / self.intrinsics.fy,
        );
        let pr = self.lens.undistort(pl)?;
        let pn = refract_inverse(n, pr);

        let j_lens_inv = self
            .lens
            .distort_jacobian(pr)
            .try_inverse()
            .ok_or(CameraError::UndistortDiverged { iterations: 0, residual: f64::NAN })?;
        let j_refr_inv = refract_jacobian_point(n, pn)?
            .try_inverse()
            .ok_or(CameraError::BeyondCriticalAngle { h: 0.0 })?;
        let k_inv = Matrix2::new(1.0 / self.intrinsics.fx, 0.0, 0.0, 1.0 / self.intrinsics.fy);

        // Lift the unit-plane point to the unit sphere: p~ = (x, y, 1)/s.
        let s2 = 1.0 + pn.x * pn.x + pn.y * pn.y;
        let s = s2.sqrt();
        let w = Vector3::new(pn.x, pn.y, 1.0);
        let mut lift = Matrix3x2::zeros();
        lift[(0, 0)] = 1.0 / s;
        lift[(1, 1)] = 1.0 / s;
        let ds = Vector2::new(pn.x / s, pn.y / s); // d s / d pn
        let j_lift = lift - w * ds.transpose() / s2;
        Ok(j_lift * j_refr_inv * j_lens_inv * k_inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_camera() -> RefractiveCamera {
        RefractiveCamera::new(
            Intrinsics::new(400.0, 400.0, 320.0, 320.0),
            EquidistantParams::zero(),
        )
    }

    fn realistic_camera() -> RefractiveCamera {
        RefractiveCamera::new(
            Intrinsics::new(140.0, 141.5, 159.5, 127.5),
            EquidistantParams::new(0.013, -0.0021, 0.0004, -6e-5),
        )
    }

    #[test]
    fn on_axis_point_hits_principal_point() {
        let cam = realistic_camera();
        for n in [1.0, 1.33, 1.6] {
            let u = cam
                .project(RefractiveIndex(n), &Vector3::new(0.0, 0.0, 1.0))
                .unwrap();
            assert_relative_eq!(u.u, cam.intrinsics.cx, epsilon = 1e-12);
            assert_relative_eq!(u.v, cam.intrinsics.cy, epsilon = 1e-12);
        }
    }

    #[test]
    fn water_projection_composes_gain_and_lens() {
        // fx = fy = 400, c = (320, 320), k = 0, n = 1.33, p = (0.5, 0, 1):
        // refracted radius 0.739905, so u = 320 + 400 atan(0.739905).
        let cam = test_camera();
        let u = cam
            .project(RefractiveIndex(1.33), &Vector3::new(0.5, 0.0, 1.0))
            .unwrap();
        let m = refraction_gain_from_air(RefractiveIndex(1.33), 0.5).unwrap();
        let expected = 320.0 + 400.0 * (m * 0.5).atan();
        assert_relative_eq!(u.u, expected, epsilon = 1e-12);
        assert_relative_eq!(u.u, 320.0 + 400.0 * 0.739905f64.atan(), epsilon = 1e-3);
        assert_relative_eq!(u.v, 320.0, epsilon = 1e-12);
    }

    /// Independently coded in-air pinhole + equidistant oracle (no refraction
    /// stage, direct composition).
    fn air_oracle_project(cam: &RefractiveCamera, p: &Vector3<f64>) -> (f64, f64) {
        let x = p.x / p.z;
        let y = p.y / p.z;
        let r = (x * x + y * y).sqrt();
        let scale = if r < 1e-12 {
            1.0
        } else {
            let th = r.atan();
            let t2 = th * th;
            let k = &cam.lens;
            th * (1.0 + k.k1 * t2 + k.k2 * t2 * t2 + k.k3 * t2.powi(3) + k.k4 * t2.powi(4)) / r
        };
        (
            cam.intrinsics.fx * scale * x + cam.intrinsics.cx,
            cam.intrinsics.fy * scale * y + cam.intrinsics.cy,
        )
    }

    #[test]
    fn air_reduces_to_in_air_calibration() {
        let cam = realistic_camera();
        for p in [
            Vector3::new(0.2, -0.4, 1.3),
            Vector3::new(-0.9, 0.6, 2.0),
            Vector3::new(0.0, 0.0, 0.7),
        ] {
            let u = cam.project(RefractiveIndex::AIR, &p).unwrap();
            let (ou, ov) = air_oracle_project(&cam, &p);
            assert_relative_eq!(u.u, ou, epsilon = 1e-12);
            assert_relative_eq!(u.v, ov, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_n_is_zero_on_axis() {
        let cam = realistic_camera();
        let (_, dn) = cam
            .project_jacobians(RefractiveIndex(1.33), &Vector3::new(0.0, 0.0, 2.5))
            .unwrap();
        assert_eq!(dn, Vector2::zeros());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let cam = realistic_camera();
        let n = 1.33;
        let p = Vector3::new(0.35, -0.2, 1.1);
        let (dp, dn) = cam.project_jacobians(RefractiveIndex(n), &p).unwrap();

        let ep = 1e-7;
        for col in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[col] += ep;
            lo[col] -= ep;
            let uh = cam.project(RefractiveIndex(n), &hi).unwrap();
            let ul = cam.project(RefractiveIndex(n), &lo).unwrap();
            assert_relative_eq!(dp[(0, col)], (uh.u - ul.u) / (2.0 * ep), max_relative = 1e-5);
            assert_relative_eq!(dp[(1, col)], (uh.v - ul.v) / (2.0 * ep), max_relative = 1e-5);
        }
        let en = 1e-7;
        let uh = cam.project(RefractiveIndex(n + en), &p).unwrap();
        let ul = cam.project(RefractiveIndex(n - en), &p).unwrap();
        assert_relative_eq!(dn.x, (uh.u - ul.u) / (2.0 * en), max_relative = 1e-5);
        assert_relative_eq!(dn.y, (uh.v - ul.v) / (2.0 * en), max_relative = 1e-5);
    }

    #[test]
    fn unproject_center_is_optical_axis() {
        let cam = realistic_camera();
        let b = cam
            .unproject(
                RefractiveIndex(1.33),
                PixelPoint::new(cam.intrinsics.cx, cam.intrinsics.cy),
            )
            .unwrap();
        assert_relative_eq!(b.into_inner(), Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn project_unproject_roundtrip_on_pixel_grid() {
        let cam = realistic_camera();
        for n in [1.0, 1.33, 1.6] {
            for iy in 0..16 {
                for ix in 0..16 {
                    let u = PixelPoint::new(8.0 + 19.0 * ix as f64, 8.0 + 15.0 * iy as f64);
                    let b = cam.unproject(RefractiveIndex(n), u).unwrap();
                    assert_relative_eq!(b.norm(), 1.0, epsilon = 1e-12);
                    for scale in [0.3, 1.0, 7.5] {
                        let p = b.into_inner() * scale;
                        let back = cam.project(RefractiveIndex(n), &p).unwrap();
                        let err = ((back.u - u.u).powi(2) + (back.v - u.v).powi(2)).sqrt();
                        assert!(err < 1e-6, "roundtrip {err} px at {u:?}, n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn unproject_air_matches_pinhole_equidistant_oracle() {
        // Oracle: invert the in-air model by bisection on the radius.
        let cam = realistic_camera();
        let u = PixelPoint::new(201.0, 77.0);
        let b = cam.unproject(RefractiveIndex::AIR, u).unwrap();
        let p = b.into_inner() / b.z;
        let (ou, ov) = air_oracle_project(&cam, &Vector3::new(p.x, p.y, 1.0));
        assert_relative_eq!(ou, u.u, epsilon = 1e-9);
        assert_relative_eq!(ov, u.v, epsilon = 1e-9);
    }

    #[test]
    fn unproject_jacobian_matches_finite_differences() {
        let cam = realistic_camera();
        let n = RefractiveIndex(1.33);
        let u = PixelPoint::new(210.0, 90.0);
        let j = cam.unproject_jacobian(n, u).unwrap();
        let e = 1e-4;
        let bu_hi = cam.unproject(n, PixelPoint::new(u.u + e, u.v)).unwrap();
        let bu_lo = cam.unproject(n, PixelPoint::new(u.u - e, u.v)).unwrap();
        let bv_hi = cam.unproject(n, PixelPoint::new(u.u, u.v + e)).unwrap();
        let bv_lo = cam.unproject(n, PixelPoint::new(u.u, u.v - e)).unwrap();
        let fd_u = (bu_hi.into_inner() - bu_lo.into_inner()) / (2.0 * e);
        let fd_v = (bv_hi.into_inner() - bv_lo.into_inner()) / (2.0 * e);
        for row in 0..3 {
            assert_relative_eq!(j[(row, 0)], fd_u[row], epsilon = 1e-7, max_relative = 1e-5);
            assert_relative_eq!(j[(row, 1)], fd_v[row], epsilon = 1e-7, max_relative = 1e-5);
        }
    }

    #[test]
    fn projection_of_unprojection_has_identity_jacobian() {
        let cam = realistic_camera();
        let n = RefractiveIndex(1.4);
        let u = PixelPoint::new(250.0, 160.0);
        let b = cam.unproject(n, u).unwrap();
        let (dp, _) = cam.project_jacobians(n, &b.into_inner()).unwrap();
        let ju = cam.unproject_jacobian(n, u).unwrap();
        let prod = dp * ju;
        assert_relative_eq!(prod, Matrix2::identity(), epsilon = 1e-9);
    }
}
