//! IMU-driven state and covariance propagation.
//!
//! Robocentric kinematics: with bias-corrected rates `w = gyro - b_w` and
//! specific force `f = accel - b_f`,
//!
//! ```text
//! r'  = -w x r + v
//! v'  = -w x v + f + q^T(g)
//! q'  from w (body rates)
//! n'  = 0 (random walk in covariance only)
//! ```
//!
//! biases and extrinsics are constant, and landmarks move with the exact
//! inverse of the camera's rigid motion over the step. The covariance uses a
//! first-order discrete transition; the gyro/accelerometer white noise is
//! injected through the same columns as the corresponding bias errors, which
//! keeps every noise coupling consistent with the transition itself.

use super::state::{
    feature_index, FilterCovariance, FilterState, ImuMeasurement, NoiseConfig, IDX_BF, IDX_BW,
    IDX_N, IDX_Q, IDX_R, IDX_V,
};
use crate::math::{skew, so3_right_jacobian, tangent_basis};
use crate::sensitivity::RelativeMotion;
use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};

/// Gravity in the world frame, m/s^2.
pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

/// Camera-frame rigid motion over one step: `p_cam_new = R p_cam_old + t`.
fn step_camera_motion(
    state: &FilterState,
    delta_rot_t: &Matrix3<f64>,
    dt: f64,
) -> (Matrix3<f64>, Vector3<f64>) {
    let r_cb = state.z.to_rotation_matrix();
    let rot = r_cb.matrix() * delta_rot_t * r_cb.matrix().transpose();
    let trans = r_cb.matrix() * (delta_rot_t * (state.c - state.v * dt) - state.c);
    (rot, trans)
}

/// Discrete transition Jacobian of the error state over one IMU step,
/// evaluated at the pre-step state.
///
/// The extrinsics columns are left as identity: their covariance is pinned
/// to zero, so couplings through them never contribute.
pub(crate) fn transition_jacobian(
    state: &FilterState,
    imu: &ImuMeasurement,
    dt: f64,
) -> DMatrix<f64> {
    let w = imu.angular_rate - state.b_w;
    let g_body = state.q.to_rotation_matrix().transpose() * GRAVITY;
    let delta_rot_t = UnitQuaternion::from_scaled_axis(w * dt)
        .to_rotation_matrix()
        .matrix()
        .transpose();
    let jr = so3_right_jacobian(&(w * dt));
    let (rel_rot_mat, rel_trans) = step_camera_motion(state, &delta_rot_t, dt);
    let r_cb = state.z.to_rotation_matrix();

    let dim = state.dim();
    let mut f_mat = DMatrix::<f64>::identity(dim, dim);
    let set3 = |m: &mut DMatrix<f64>, row: usize, col: usize, b: &Matrix3<f64>| {
        for i in 0..3 {
            for j in 0..3 {
                m[(row + i, col + j)] = b[(i, j)];
            }
        }
    };
    let eye = Matrix3::identity();
    set3(&mut f_mat, IDX_R, IDX_R, &(eye - dt * skew(&w)));
    set3(&mut f_mat, IDX_R, IDX_V, &(dt * eye));
    set3(&mut f_mat, IDX_R, IDX_BW, &(-dt * skew(&state.r)));
    set3(&mut f_mat, IDX_Q, IDX_Q, &delta_rot_t);
    set3(&mut f_mat, IDX_Q, IDX_BW, &(-dt * jr));
    set3(&mut f_mat, IDX_V, IDX_Q, &(dt * skew(&g_body)));
    set3(&mut f_mat, IDX_V, IDX_V, &(eye - dt * skew(&w)));
    set3(&mut f_mat, IDX_V, IDX_BF, &(-dt * eye));
    set3(&mut f_mat, IDX_V, IDX_BW, &(-dt * skew(&state.v)));

    for (j, feat) in state.features.iter().enumerate() {
        let base = feature_index(j);
        let mu = feat.bearing.into_inner();
        let rho = feat.rho;
        let u = rel_rot_mat * (mu / rho) + rel_trans;
        let norm = u.norm();
        let mu_new = Unit::new_normalize(u);
        let rho_new = 1.0 / norm;

        let basis_old = tangent_basis(&feat.bearing);
        let basis_new = tangent_basis(&mu_new);
        let p_new = basis_new.transpose() * skew(&mu_new.into_inner()); // 2x3
        let du_dmu = rel_rot_mat * (-skew(&mu) * basis_old) / rho; // 3x2
        let du_drho = -(rel_rot_mat * mu) / (rho * rho); // 3x1
        let du_dv = -dt * (r_cb.matrix() * delta_rot_t); // 3x3
        let y_vec = delta_rot_t * (r_cb.matrix().transpose() * (mu / rho));
        let t_arg = delta_rot_t * (state.c - state.v * dt);
        let du_dbw = -dt * (r_cb.matrix() * (skew(&y_vec) + skew(&t_arg)) * jr); // 3x3

        let mu_rows = p_new / norm;
        let rho_row = -(rho_new * rho_new) * mu_new.transpose();

        let f_mu_mu = &mu_rows * &du_dmu;
        let f_mu_rho = &mu_rows * &du_drho;
        let f_mu_v = &mu_rows * &du_dv;
        let f_mu_bw = &mu_rows * &du_dbw;
        let f_rho_mu = &rho_row * &du_dmu;
        let f_rho_rho = (&rho_row * &du_drho)[(0, 0)];
        let f_rho_v = &rho_row * &du_dv;
        let f_rho_bw = &rho_row * &du_dbw;

        for a in 0..2 {
            for b in 0..2 {
                f_mat[(base + a, base + b)] = f_mu_mu[(a, b)];
            }
            f_mat[(base + a, base + 2)] = f_mu_rho[(a, 0)];
            for b in 0..3 {
                f_mat[(base + a, IDX_V + b)] = f_mu_v[(a, b)];
                f_mat[(base + a, IDX_BW + b)] = f_mu_bw[(a, b)];
            }
        }
        for b in 0..2 {
            f_mat[(base + 2, base + b)] = f_rho_mu[(0, b)];
        }
        f_mat[(base + 2, base + 2)] = f_rho_rho;
        for b in 0..3 {
            f_mat[(base + 2, IDX_V + b)] = f_rho_v[(0, b)];
            f_mat[(base + 2, IDX_BW + b)] = f_rho_bw[(0, b)];
        }
    }
    f_mat
}

/// Propagate mean and covariance over `dt` with one IMU sample held constant.
///
/// Returns the camera-frame rigid motion of the step (current-from-previous),
/// which the frontend accumulates for warping and the sensitivity heuristic.
pub fn propagate(
    state: &mut FilterState,
    cov: &mut FilterCovariance,
    imu: &ImuMeasurement,
    dt: f64,
    noise: &NoiseConfig,
) -> RelativeMotion {
    assert!(dt > 0.0 && dt < 0.1, "IMU step {dt} s outside (0, 0.1)");
    assert!(
        imu.specific_force.iter().all(|x| x.is_finite())
            && imu.angular_rate.iter().all(|x| x.is_finite()),
        "non-finite IMU sample"
    );
    let w = imu.angular_rate - state.b_w;
    let f = imu.specific_force - state.b_f;
    let g_body = state.q.to_rotation_matrix().transpose() * GRAVITY;
    let delta_rot = UnitQuaternion::from_scaled_axis(w * dt);
    let delta_rot_t = delta_rot.to_rotation_matrix().matrix().transpose();
    let (rel_rot, rel_trans) = step_camera_motion(state, &delta_rot_t, dt);

    let f_mat = transition_jacobian(state, imu, dt);

    // Mean update (Euler for r/v, exact exponential for the attitude,
    // exact rigid transform for the landmarks).
    let r_old = state.r;
    let v_old = state.v;
    state.r = r_old + dt * (-w.cross(&r_old) + v_old);
    state.v = v_old + dt * (-w.cross(&v_old) + f + g_body);
    state.q *= delta_rot;
    for feat in state.features.iter_mut() {
        let p = rel_rot * (feat.bearing.into_inner() / feat.rho) + rel_trans;
        feat.rho = 1.0 / p.norm();
        feat.bearing = Unit::new_normalize(p);
    }

    // Covariance: F S F^T plus process noise. The white accelerometer/gyro
    // noise enters the dynamics exactly like the bias errors do, so its
    // injection columns are the F bias columns with the bias-memory identity
    // removed (the noise has no random-walk row of its own).
    let mut sigma = &f_mat * &cov.matrix * f_mat.transpose();
    let mut bf_cols = f_mat.columns(IDX_BF, 3).into_owned();
    let mut bw_cols = f_mat.columns(IDX_BW, 3).into_owned();
    for i in 0..3 {
        for j in 0..3 {
            bf_cols[(IDX_BF + i, j)] = 0.0;
            bw_cols[(IDX_BW + i, j)] = 0.0;
        }
    }
    let qa = noise.accel_density * noise.accel_density / dt;
    let qg = noise.gyro_density * noise.gyro_density / dt;
    sigma += &bf_cols * bf_cols.transpose() * qa;
    sigma += &bw_cols * bw_cols.transpose() * qg;
    for i in 0..3 {
        sigma[(IDX_BF + i, IDX_BF + i)] += noise.accel_bias_rw * noise.accel_bias_rw * dt;
        sigma[(IDX_BW + i, IDX_BW + i)] += noise.gyro_bias_rw * noise.gyro_bias_rw * dt;
    }
    sigma[(IDX_N, IDX_N)] += noise.mn_density * noise.mn_density * dt;
    for j in 0..state.features.len() {
        let base = feature_index(j);
        sigma[(base, base)] += noise.bearing_density * noise.bearing_density * dt;
        sigma[(base + 1, base + 1)] += noise.bearing_density * noise.bearing_density * dt;
        sigma[(base + 2, base + 2)] += noise.rho_density * noise.rho_density * dt;
    }
    cov.matrix = sigma;
    cov.symmetrize();

    RelativeMotion {
        rotation: Rotation3::from_matrix_unchecked(rel_rot),
        translation: rel_trans,
    }
}
