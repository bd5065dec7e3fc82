//! Synthetic underwater scene: textured pool walls, analytic trajectories,
//! IMU synthesis and refraction-aware rendering, with dataset export.

mod imu;
mod render;
mod scene;
mod trajectory;
mod write;

pub use imu::{ideal_imu, synthesize_imu};
pub use render::{render_depth, render_frame, Renderer};
pub use scene::{pool_scene, SimScene, Texture, Wall};
pub use trajectory::{PoseProvider, SimTrajectory, TrajectoryPattern};
pub use write::generate_dataset;

use crate::io::CameraCalibration;
use nalgebra::Vector3;

/// Everything a synthetic recording depends on.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// True refractive index of the medium; never written to the dataset.
    pub true_n: f64,
    pub calibration: CameraCalibration,
    pub frame_rate_hz: u32,
    pub imu_rate_hz: u32,
    pub seed: u64,
    pub accel_bias: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    /// Scene brightness gain in (0, 1].
    pub ambient: f64,
    /// Additive Gaussian intensity noise (levels) applied before quantization.
    pub image_noise_std: f64,
}

impl SimConfig {
    pub fn validate(&self) {
        assert!(self.true_n >= 1.0, "refractive index below 1");
        assert!(
            self.imu_rate_hz >= 5 * self.frame_rate_hz,
            "IMU rate must be at least 5x the frame rate"
        );
        assert!(self.ambient > 0.0 && self.ambient <= 1.0, "ambient gain outside (0, 1]");
    }
}

/// Default rig used across the simulator: wide equidistant lens inclined 16
/// degrees down, body x forward / y left / z up.
pub fn default_calibration() -> CameraCalibration {
    use crate::camera::{EquidistantParams, Intrinsics};
    use nalgebra::{Matrix3, Matrix4};

    // Camera axes in the body frame: optical axis along body +x pitched down,
    // image u along -y (right), image v along -z (down).
    let pitch = 16.0f64.to_radians();
    let base = Matrix3::from_columns(&[
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(1.0, 0.0, 0.0),
    ]);
    let tilt = Matrix3::new(
        1.0,
        0.0,
        0.0,
        0.0,
        pitch.cos(),
        pitch.sin(),
        0.0,
        -pitch.sin(),
        pitch.cos(),
    );
    let r_bc = base * tilt;
    let mut t_bc = Matrix4::identity();
    t_bc.fixed_view_mut::<3, 3>(0, 0).copy_from(&r_bc);
    t_bc.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&Vector3::new(0.15, 0.0, 0.05));
    CameraCalibration {
        intrinsics: Intrinsics::new(140.0, 140.0, 159.5, 127.5),
        lens: EquidistantParams::new(0.013, -0.0021, 0.0004, -6e-5),
        t_bc,
        accel_noise_density: 2.0e-3,
        gyro_noise_density: 2.4e-4,
        accel_bias_random_walk: 1.0e-4,
        gyro_bias_random_walk: 1.0e-5,
        image_width: 320,
        image_height: 256,
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            true_n: 1.33,
            calibration: default_calibration(),
            frame_rate_hz: 20,
            imu_rate_hz: 200,
            seed: 7,
            accel_bias: Vector3::new(0.02, -0.015, 0.01),
            gyro_bias: Vector3::new(0.001, -0.0008, 0.0005),
            ambient: 1.0,
            image_noise_std: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_camera_points_forward_and_down() {
        let cal = default_calibration();
        let optical_axis_body = cal.t_bc.fixed_view::<3, 3>(0, 0) * Vector3::z();
        // Forward with a 16-degree downward pitch.
        assert!(optical_axis_body.x > 0.95);
        approx::assert_relative_eq!(
            optical_axis_body.z,
            -(16.0f64.to_radians().sin()),
            epsilon = 1e-12
        );
        assert!(optical_axis_body.y.abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "IMU rate")]
    fn rate_invariant_is_enforced() {
        let cfg = SimConfig { imu_rate_hz: 50, frame_rate_hz: 20, ..SimConfig::default() };
        cfg.validate();
    }
}
