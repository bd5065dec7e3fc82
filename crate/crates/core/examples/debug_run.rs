// Diagnostic harness: run the estimator on a short synthetic dataset and
// print per-frame tracking internals. Not part of the shipped interface.

use nalgebra::UnitQuaternion;
use refvio_core::estimator::{Estimator, RunConfig};
use refvio_core::io::read_dataset;
use refvio_core::sim::{generate_dataset, pool_scene, SimConfig, SimTrajectory, TrajectoryPattern};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fix_n = args.iter().any(|a| a == "--fix-n");
    let initial_n: f64 = args
        .iter()
        .position(|a| a == "--n0")
        .map(|i| args[i + 1].parse().unwrap())
        .unwrap_or(1.35);

    let arg_f64 = |name: &str, default: f64| -> f64 {
        args.iter()
            .position(|a| a == name)
            .map(|i| args[i + 1].parse().unwrap())
            .unwrap_or(default)
    };
    let period = arg_f64("--period", 20.0);
    let laps = arg_f64("--laps", 1.0) as u32;
    let pattern = args
        .iter()
        .position(|a| a == "--pattern")
        .map(|i| TrajectoryPattern::parse(&args[i + 1]).unwrap())
        .unwrap_or(TrajectoryPattern::Rectangle);
    let clean = args.iter().any(|a| a == "--clean");
    let dir = std::env::temp_dir().join(format!(
        "refvio_debug_{}_{period}x{laps}_c{}_n{}",
        pattern.name(),
        clean as u8,
        arg_f64("--true-n", 1.33)
    ));
    if !dir.join("config.txt").exists() {
        let scene = pool_scene(21);
        let traj = SimTrajectory::new(pattern, period, laps);
        let mut cfg = SimConfig {
            seed: 5,
            image_noise_std: 0.5,
            true_n: arg_f64("--true-n", 1.33),
            ..SimConfig::default()
        };
        if clean {
            cfg.accel_bias = nalgebra::Vector3::zeros();
            cfg.gyro_bias = nalgebra::Vector3::zeros();
            cfg.calibration.accel_noise_density = 1e-8;
            cfg.calibration.gyro_noise_density = 1e-8;
            cfg.image_noise_std = 0.0;
        }
        generate_dataset(&scene, &traj, &cfg, &dir).unwrap();
        eprintln!("dataset written to {}", dir.display());
    }
    let dataset = read_dataset(&dir).unwrap();
    let cal = &dataset.calibration;
    let mn: f64 = std::env::args()
        .position(|a| a == "--mn")
        .map(|i| std::env::args().nth(i + 1).unwrap().parse().unwrap())
        .unwrap_or(1e-4);
    let levels: usize = arg_f64("--levels", 2.0) as usize;
    let cfg = RunConfig {
        initial_n,
        fix_n,
        mn_density: mn,
        pyramid_levels: levels,
        force_zero_sensitivity: args.iter().any(|a| a == "--zero-v"),
        rho_prior: arg_f64("--rho-prior", 1.0 / 1.5),
        sigma_rho: arg_f64("--sigma-rho", 1.0),
        patch_size: arg_f64("--patch", 8.0) as usize,
        max_features: arg_f64("--feats", 20.0) as usize,
        heuristic: refvio_core::sensitivity::HeuristicParams::new(
            arg_f64("--hq", 0.5),
            arg_f64("--hk", 0.8),
        ),
        iekf_iterations: arg_f64("--iters", 5.0) as usize,
        iekf_step_tol: arg_f64("--tol", 1e-4),
        sigma_intensity: arg_f64("--sigma-i", 2.0),
        ..RunConfig::default()
    };
    let mut est = Estimator::new(
        cal.camera(),
        cal.cam_position_in_body(),
        UnitQuaternion::from_rotation_matrix(&cal.rot_cam_from_body()),
        (cal.image_width, cal.image_height),
        cal.noise_config(),
        cfg,
    );
    let truth = dataset.groundtruth.clone().unwrap();
    let mut imu_iter = dataset.imu.iter().peekable();
    let mut records = Vec::new();
    for (idx, frame) in dataset.frames.iter().enumerate() {
        while let Some((t_ns, imu)) = imu_iter.peek() {
            if *t_ns > frame.t_ns {
                break;
            }
            est.process_imu(imu);
            imu_iter.next();
        }
        let img = dataset.load_frame(idx).unwrap();
        if let Some(rec) = est.process_frame(frame.t_ns, &img) {
            if idx % 100 == 0 {
                eprintln!(
                    "f{idx:4} t={:6.2} n={:.4}±{:.4} feats={:2} p=({:7.2},{:7.2},{:6.2})",
                    rec.t_ns as f64 * 1e-9,
                    rec.n,
                    rec.n_std,
                    rec.num_features,
                    rec.position.x,
                    rec.position.y,
                    rec.position.z,
                );
            }
            records.push(rec);
        }
    }
    use refvio_core::io::{compute_ape, path_length, AlignMode, TrajectorySample};
    let est_traj: Vec<TrajectorySample> = records
        .iter()
        .map(|r| TrajectorySample { t_ns: r.t_ns, position: r.position, attitude: r.attitude })
        .collect();
    let ape = compute_ape(&est_traj, &truth, AlignMode::Se3, 0.0).unwrap();
    eprintln!(
        "SE3 APE: rmse={:.3} mean={:.3} max={:.3} over {} samples, path={:.1} m",
        ape.rmse,
        ape.mean,
        ape.max,
        ape.count,
        path_length(&truth)
    );
}
