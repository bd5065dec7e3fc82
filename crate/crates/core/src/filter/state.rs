//! Filter state, covariance container and manifold retraction.

use crate::math::{bearing_boxminus, bearing_boxplus, tangent_basis};
use nalgebra::{DMatrix, DVector, Matrix3x2, Unit, UnitQuaternion, Vector3};

/// Error-state dimension of the non-feature block.
pub const CORE_DIM: usize = 22;
/// Error-state offsets of the core blocks.
pub const IDX_R: usize = 0;
pub const IDX_Q: usize = 3;
pub const IDX_V: usize = 6;
pub const IDX_BF: usize = 9;
pub const IDX_BW: usize = 12;
pub const IDX_C: usize = 15;
pub const IDX_Z: usize = 18;
pub const IDX_N: usize = 21;

/// Error-state offset of feature `j` (2 bearing + 1 inverse distance).
#[inline]
pub const fn feature_index(j: usize) -> usize {
    CORE_DIM + 3 * j
}

/// One IMU sample: specific force and angular rate in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuMeasurement {
    pub t: f64,
    pub specific_force: Vector3<f64>,
    pub angular_rate: Vector3<f64>,
}

/// Continuous-time noise densities driving the filter.
#[derive(Debug, Clone, Copy)]
pub struct NoiseConfig {
    /// Accelerometer white noise density, m/s^2/sqrt(Hz).
    pub accel_density: f64,
    /// Gyroscope white noise density, rad/s/sqrt(Hz).
    pub gyro_density: f64,
    /// Accelerometer bias random walk, m/s^3/sqrt(Hz).
    pub accel_bias_rw: f64,
    /// Gyroscope bias random walk, rad/s^2/sqrt(Hz).
    pub gyro_bias_rw: f64,
    /// Refractive-index random walk density, 1/sqrt(s).
    pub mn_density: f64,
    /// Photometric measurement noise, intensity levels.
    pub sigma_intensity: f64,
    /// Landmark bearing process noise, rad/sqrt(s). Keeps repeated reads of
    /// a static patch from collapsing the bearing (and with it the joint
    /// bearing/refractive-index) uncertainty; photometric errors of nearby
    /// frames are far from independent.
    pub bearing_density: f64,
    /// Landmark inverse-distance process noise, 1/(m sqrt(s)).
    pub rho_density: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            accel_density: 2.0e-3,
            gyro_density: 2.4e-4,
            accel_bias_rw: 1.0e-4,
            gyro_bias_rw: 1.0e-5,
            mn_density: 1.0e-4,
            sigma_intensity: 2.0,
            bearing_density: 2.0e-3,
            rho_density: 1.0e-2,
        }
    }
}

/// Bearing and inverse distance of one landmark, in the camera frame.
#[derive(Debug, Clone, Copy)]
pub struct FeatureState {
    pub bearing: Unit<Vector3<f64>>,
    /// Inverse distance, 1/m; the landmark sits at `bearing / rho`.
    pub rho: f64,
}

/// Full filter state. `r`, `v` are the robocentric IMU position and velocity
/// expressed in the body frame, `q` maps body to world, `c`/`z` are the
/// camera-IMU extrinsics (body to camera), `n` the refractive index.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub r: Vector3<f64>,
    pub q: UnitQuaternion<f64>,
    pub v: Vector3<f64>,
    pub b_f: Vector3<f64>,
    pub b_w: Vector3<f64>,
    pub c: Vector3<f64>,
    pub z: UnitQuaternion<f64>,
    pub n: f64,
    pub features: Vec<FeatureState>,
}

impl FilterState {
    pub fn identity_with_n(n: f64) -> Self {
        Self {
            r: Vector3::zeros(),
            q: UnitQuaternion::identity(),
            v: Vector3::zeros(),
            b_f: Vector3::zeros(),
            b_w: Vector3::zeros(),
            c: Vector3::zeros(),
            z: UnitQuaternion::identity(),
            n,
            features: Vec::new(),
        }
    }

    /// Error-state dimension: 22 + 3 per feature.
    pub fn dim(&self) -> usize {
        CORE_DIM + 3 * self.features.len()
    }

    /// World position of the IMU (the robocentric `r` rotated into world).
    pub fn world_position(&self) -> Vector3<f64> {
        self.q * self.r
    }

    /// Tangent basis of feature `j`'s bearing.
    pub fn feature_basis(&self, j: usize) -> Matrix3x2<f64> {
        tangent_basis(&self.features[j].bearing)
    }

    /// Retract an error vector onto the state manifold.
    ///
    /// Additive for vectors and scalars, exponential for the quaternions,
    /// tangent-plane rotation for bearings.
    pub fn boxplus(&self, delta: &DVector<f64>) -> FilterState {
        assert_eq!(delta.len(), self.dim(), "error vector dimension mismatch");
        let seg3 = |i: usize| Vector3::new(delta[i], delta[i + 1], delta[i + 2]);
        let mut out = self.clone();
        out.r += seg3(IDX_R);
        out.q = self.q * UnitQuaternion::from_scaled_axis(seg3(IDX_Q));
        out.v += seg3(IDX_V);
        out.b_f += seg3(IDX_BF);
        out.b_w += seg3(IDX_BW);
        out.c += seg3(IDX_C);
        out.z = self.z * UnitQuaternion::from_scaled_axis(seg3(IDX_Z));
        out.n += delta[IDX_N];
        for (j, f) in out.features.iter_mut().enumerate() {
            let base = feature_index(j);
            f.bearing = bearing_boxplus(&self.features[j].bearing, delta[base], delta[base + 1]);
            f.rho += delta[base + 2];
        }
        out
    }

    /// Local inverse of [`Self::boxplus`]: the error vector taking `other`
    /// to `self`.
    pub fn boxminus(&self, other: &FilterState) -> DVector<f64> {
        assert_eq!(self.features.len(), other.features.len());
        let mut delta = DVector::zeros(self.dim());
        let mut set3 = |i: usize, v: Vector3<f64>| {
            delta[i] = v.x;
            delta[i + 1] = v.y;
            delta[i + 2] = v.z;
        };
        set3(IDX_R, self.r - other.r);
        set3(IDX_Q, (other.q.inverse() * self.q).scaled_axis());
        set3(IDX_V, self.v - other.v);
        set3(IDX_BF, self.b_f - other.b_f);
        set3(IDX_BW, self.b_w - other.b_w);
        set3(IDX_C, self.c - other.c);
        set3(IDX_Z, (other.z.inverse() * self.z).scaled_axis());
        delta[IDX_N] = self.n - other.n;
        for j in 0..self.features.len() {
            let base = feature_index(j);
            let (d1, d2) = bearing_boxminus(&self.features[j].bearing, &other.features[j].bearing);
            delta[base] = d1;
            delta[base + 1] = d2;
            delta[base + 2] = self.features[j].rho - other.features[j].rho;
        }
        delta
    }

    /// Renormalize the unit-norm members.
    pub fn renormalize(&mut self) {
        self.q.renormalize_fast();
        self.z.renormalize_fast();
        for f in &mut self.features {
            f.bearing = Unit::new_normalize(f.bearing.into_inner());
        }
    }

    /// Largest deviation of any unit-norm member from norm 1.
    pub fn max_norm_defect(&self) -> f64 {
        let mut worst = (self.q.as_vector().norm() - 1.0).abs();
        worst = worst.max((self.z.as_vector().norm() - 1.0).abs());
        for f in &self.features {
            worst = worst.max((f.bearing.norm() - 1.0).abs());
        }
        worst
    }
}

/// Error-state covariance with hygiene helpers.
#[derive(Debug, Clone)]
pub struct FilterCovariance {
    pub matrix: DMatrix<f64>,
}

impl FilterCovariance {
    pub fn zeros(dim: usize) -> Self {
        Self { matrix: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest asymmetry |S - S^T| before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        let m = &mut self.matrix;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
    }

    /// Smallest eigenvalue of the (symmetrized) covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = nalgebra::SymmetricEigen::new(self.matrix.clone());
        sym.eigenvalues.min()
    }

    /// Append a 3x3 feature block with the given bearing/inverse-distance
    /// standard deviations.
    ///
    /// `n_sensitivity`, when present, is the derivative of the initialized
    /// bearing (tangent coordinates) with respect to the refractive index:
    /// a bearing unprojected through an uncertain `n` inherits that
    /// uncertainty, fully correlated with the `n` state and everything `n`
    /// is correlated with.
    pub fn push_feature_block(
        &mut self,
        sigma_bearing: f64,
        sigma_rho: f64,
        n_sensitivity: Option<nalgebra::Vector2<f64>>,
    ) {
        let old = self.dim();
        let mut m = DMatrix::zeros(old + 3, old + 3);
        m.view_mut((0, 0), (old, old)).copy_from(&self.matrix);
        m[(old, old)] = sigma_bearing * sigma_bearing;
        m[(old + 1, old + 1)] = sigma_bearing * sigma_bearing;
        m[(old + 2, old + 2)] = sigma_rho * sigma_rho;
        if let Some(j_n) = n_sensitivity {
            // New rows: J_n * Sigma[n, :]; self block: J_n Sigma_nn J_n^T.
            for col in 0..old {
                let s = self.matrix[(IDX_N, col)];
                m[(old, col)] = j_n.x * s;
                m[(old + 1, col)] = j_n.y * s;
                m[(col, old)] = j_n.x * s;
                m[(col, old + 1)] = j_n.y * s;
            }
            let snn = self.matrix[(IDX_N, IDX_N)];
            m[(old, old)] += j_n.x * j_n.x * snn;
            m[(old, old + 1)] += j_n.x * j_n.y * snn;
            m[(old + 1, old)] += j_n.y * j_n.x * snn;
            m[(old + 1, old + 1)] += j_n.y * j_n.y * snn;
        }
        self.matrix = m;
    }

    /// Remove the 3x3 block of feature `j` (rows and columns).
    pub fn remove_feature_block(&mut self, j: usize) {
        let base = feature_index(j);
        let m = std::mem::replace(&mut self.matrix, DMatrix::zeros(0, 0));
        let m = m.remove_rows(base, 3);
        self.matrix = m.remove_columns(base, 3);
    }
}
