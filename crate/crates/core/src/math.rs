//! Small SO(3)/unit-vector helpers shared by the filter and the simulator.

use nalgebra::{Matrix3, Matrix3x2, Unit, UnitQuaternion, Vector3};

/// Skew-symmetric (cross-product) matrix of `v`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Right Jacobian of SO(3): relates additive perturbations of a rotation
/// vector to local (right) tangent perturbations of the rotation.
pub fn so3_right_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let angle = phi.norm();
    let sk = skew(phi);
    if angle < 1e-7 {
        // Second-order series keeps the small-angle branch smooth.
        return Matrix3::identity() - 0.5 * sk + sk * sk / 6.0;
    }
    let a2 = angle * angle;
    Matrix3::identity() - ((1.0 - angle.cos()) / a2) * sk
        + ((angle - angle.sin()) / (a2 * angle)) * (sk * sk)
}

/// Orthonormal basis of the tangent plane at unit vector `mu`.
///
/// The columns `b1, b2` satisfy `b1 x b2 = mu`, and the basis is a
/// deterministic function of `mu`.
pub fn tangent_basis(mu: &Unit<Vector3<f64>>) -> Matrix3x2<f64> {
    let m = mu.into_inner();
    // Seed axis: the coordinate axis least aligned with mu.
    let a = m.x.abs();
    let b = m.y.abs();
    let c = m.z.abs();
    let seed = if a <= b && a <= c {
        Vector3::x()
    } else if b <= c {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let b1 = seed.cross(&m).normalize();
    let b2 = m.cross(&b1);
    Matrix3x2::from_columns(&[b1, b2])
}

/// Rotate unit vector `mu` by the tangent-plane increment `delta` expressed
/// in the basis of [`tangent_basis`].
pub fn bearing_boxplus(mu: &Unit<Vector3<f64>>, d1: f64, d2: f64) -> Unit<Vector3<f64>> {
    let basis = tangent_basis(mu);
    let w = basis.column(0) * d1 + basis.column(1) * d2;
    let rot = UnitQuaternion::from_scaled_axis(w);
    Unit::new_normalize(rot * mu.into_inner())
}

/// Tangent-plane coordinates (at `base`) of the rotation taking `base` to `mu`.
/// Local inverse of [`bearing_boxplus`].
pub fn bearing_boxminus(mu: &Unit<Vector3<f64>>, base: &Unit<Vector3<f64>>) -> (f64, f64) {
    let axis = base.cross(mu);
    let s = axis.norm();
    let c = base.dot(mu);
    if s < 1e-15 {
        if c > 0.0 {
            return (0.0, 0.0);
        }
        // Antipodal: any tangent direction works; pick the first basis axis.
        let basis = tangent_basis(base);
        let w = basis.column(0) * std::f64::consts::PI;
        return (basis.column(0).dot(&w), basis.column(1).dot(&w));
    }
    let w = axis * (s.atan2(c) / s);
    let basis = tangent_basis(base);
    (basis.column(0).dot(&w), basis.column(1).dot(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn skew_matches_cross_product() {
        let a = Vector3::new(0.3, -1.2, 2.0);
        let b = Vector3::new(-0.5, 0.7, 0.1);
        assert_relative_eq!(skew(&a) * b, a.cross(&b), epsilon = 1e-15);
    }

    #[test]
    fn right_jacobian_first_order_consistency() {
        // Defining property: Exp(phi + d) ~= Exp(phi) Exp(J_r(phi) d).
        let phi = Vector3::new(0.4, -0.2, 0.7);
        let d = Vector3::new(1e-6, -2e-6, 0.5e-6);
        let jr = so3_right_jacobian(&phi);
        let lhs = UnitQuaternion::from_scaled_axis(phi + d);
        let rhs = UnitQuaternion::from_scaled_axis(phi)
            * UnitQuaternion::from_scaled_axis(jr * d);
        // The identity holds to first order; the defect is O(|d|^2). Measure
        // it through the relative rotation vector (atan2-based, accurate for
        // tiny angles, unlike acos of the quaternion dot).
        let defect = (lhs.inverse() * rhs).scaled_axis().norm();
        assert!(defect < 1e-10, "first-order defect {defect}");
    }

    #[test]
    fn right_jacobian_small_angle_branch_continuous() {
        let phi = Vector3::new(5e-8, -3e-8, 4e-8);
        let series = so3_right_jacobian(&phi);
        let closed = {
            let angle = phi.norm();
            let sk = skew(&phi);
            let a2 = angle * angle;
            Matrix3::identity() - ((1.0 - angle.cos()) / a2) * sk
                + ((angle - angle.sin()) / (a2 * angle)) * (sk * sk)
        };
        // Closed form loses digits here; the series is the reference.
        assert!((series - closed).amax() < 1e-9);
    }

    #[test]
    fn tangent_basis_is_orthonormal_right_handed() {
        for m in [
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.3, -0.4, 0.86),
            Vector3::new(-0.7, 0.7, 0.14),
        ] {
            let mu = Unit::new_normalize(m);
            let basis = tangent_basis(&mu);
            let b1 = basis.column(0).into_owned();
            let b2 = basis.column(1).into_owned();
            assert_relative_eq!(b1.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(b2.norm(), 1.0, epsilon = 1e-12);
            assert!(b1.dot(&b2).abs() < 1e-12);
            assert!(b1.dot(&mu).abs() < 1e-12);
            assert_relative_eq!(b1.cross(&b2), mu.into_inner(), epsilon = 1e-12);
        }
    }

    #[test]
    fn bearing_boxplus_boxminus_roundtrip() {
        let mu = Unit::new_normalize(Vector3::new(0.2, -0.1, 0.97));
        for (d1, d2) in [(0.0, 0.0), (0.05, -0.02), (-0.3, 0.11), (0.7, 0.7)] {
            let moved = bearing_boxplus(&mu, d1, d2);
            let (r1, r2) = bearing_boxminus(&moved, &mu);
            assert_relative_eq!(r1, d1, epsilon = 1e-9);
            assert_relative_eq!(r2, d2, epsilon = 1e-9);
        }
    }
}
