//! Dataset export: frames, IMU stream, ground truth and in-air calibration.

use super::{synthesize_imu, Renderer, SimConfig, SimScene, SimTrajectory};
use crate::camera::RefractiveIndex;
use crate::io::{self, IoError, TrajectorySample};
use nalgebra::{Matrix3, Rotation3};
use std::path::Path;

/// Write a full synthetic recording under `out`.
///
/// The directory receives `config.txt` (in-air calibration only; the true
/// refractive index is deliberately not recorded), `imu.csv`,
/// `groundtruth.csv` at frame timestamps and `cam0/<t_ns>.pgm` frames.
pub fn generate_dataset(
    scene: &SimScene,
    traj: &SimTrajectory,
    cfg: &SimConfig,
    out: &Path,
) -> Result<(), IoError> {
    cfg.validate();
    std::fs::create_dir_all(out.join("cam0"))?;
    cfg.calibration.write(&out.join("config.txt"))?;

    let imu_rows = synthesize_imu(traj, cfg);
    io::dataset::write_imu_csv(&out.join("imu.csv"), &imu_rows)?;

    let cam = cfg.calibration.camera();
    let renderer = Renderer::new(&cam, RefractiveIndex::new(cfg.true_n), cfg);
    let frame_dt_ns = 1_000_000_000u64 / cfg.frame_rate_hz as u64;
    let n_frames = (traj.duration() * cfg.frame_rate_hz as f64).floor() as u64;
    let r_bc: Matrix3<f64> = cfg.calibration.t_bc.fixed_view::<3, 3>(0, 0).into_owned();
    let c_b = cfg.calibration.cam_position_in_body();

    let mut gt = Vec::with_capacity(n_frames as usize);
    for i in 0..n_frames {
        let t_ns = (i * frame_dt_ns) as i64;
        let t = t_ns as f64 * 1e-9;
        let (p_wb, q_wb) = traj.pose(t);
        let rot_wb = q_wb.to_rotation_matrix();
        let rot_wc = Rotation3::from_matrix_unchecked(rot_wb.matrix() * r_bc);
        let cam_pos = p_wb + rot_wb * c_b;
        let img = renderer.render(scene, &rot_wc, &cam_pos, i);
        io::write_pgm(&out.join("cam0").join(format!("{t_ns}.pgm")), &img)?;
        gt.push(TrajectorySample { t_ns, position: p_wb, attitude: q_wb });
    }
    io::dataset::write_groundtruth_csv(&out.join("groundtruth.csv"), &gt)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{pool_scene, TrajectoryPattern};

    fn quick_cfg() -> SimConfig {
        SimConfig { frame_rate_hz: 4, imu_rate_hz: 40, ..SimConfig::default() }
    }

    #[test]
    fn dataset_layout_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let scene = pool_scene(3);
        let traj = SimTrajectory::new(TrajectoryPattern::Rectangle, 10.0, 1);
        let cfg = quick_cfg();
        generate_dataset(&scene, &traj, &cfg, dir.path()).unwrap();

        let ds = crate::io::read_dataset(dir.path()).unwrap();
        let expected_frames = (traj.duration() * 4.0).floor() as usize;
        assert_eq!(ds.frames.len(), expected_frames);
        assert_eq!(ds.groundtruth.as_ref().unwrap().len(), expected_frames);
        // One IMU sample per tick plus the closing endpoint.
        let expected_imu = (traj.duration() * 40.0).ceil() as usize + 1;
        assert_eq!(ds.imu.len(), expected_imu);
        // The calibration round-trips and the frames load.
        assert_eq!(ds.calibration.image_width, 320);
        let img = ds.load_frame(0).unwrap();
        assert_eq!((img.width(), img.height()), (320, 256));
    }

    #[test]
    fn regenerating_frame_zero_is_bit_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let scene = pool_scene(3);
        let traj = SimTrajectory::new(TrajectoryPattern::Figure8, 8.0, 1);
        let cfg = quick_cfg();
        generate_dataset(&scene, &traj, &cfg, dir_a.path()).unwrap();
        generate_dataset(&scene, &traj, &cfg, dir_b.path()).unwrap();
        let a = std::fs::read(dir_a.path().join("cam0/0.pgm")).unwrap();
        let b = std::fs::read(dir_b.path().join("cam0/0.pgm")).unwrap();
        assert_eq!(a, b);
        let ia = std::fs::read(dir_a.path().join("imu.csv")).unwrap();
        let ib = std::fs::read(dir_b.path().join("imu.csv")).unwrap();
        assert_eq!(ia, ib);
    }
}
