use refvio_core::filter::{propagate, FilterCovariance, FilterState, ImuMeasurement, NoiseConfig};
use refvio_core::sim::{ideal_imu, SimTrajectory, TrajectoryPattern, PoseProvider};
use nalgebra::Vector3;

fn main() {
    let traj = SimTrajectory::new(TrajectoryPattern::Rectangle, 20.0, 1);
    let (p0, q0) = traj.pose(0.0);
    let mut s = FilterState::identity_with_n(1.33);
    s.q = q0;
    s.r = q0.inverse() * p0;
    s.v = Vector3::zeros();
    let mut cov = FilterCovariance::zeros(s.dim());
    let noise = NoiseConfig::default();
    let dt = 1.0 / 200.0;
    let mut t = 0.0;
    for step in 0..(12.0 / dt) as usize {
        let (f, w) = ideal_imu(&traj, t + dt); // backward ZOH like the estimator
        let imu = ImuMeasurement { t: t + dt, specific_force: f, angular_rate: w };
        propagate(&mut s, &mut cov, &imu, dt, &noise);
        t += dt;
        if step % 400 == 399 {
            let (p_ref, q_ref) = traj.pose(t);
            let p_est = s.q * s.r;
            println!("t={:5.2} pos_err={:8.4} m  att_err={:8.5} rad  v={:6.3}", t, (p_est - p_ref).norm(), s.q.angle_to(&q_ref), s.v.norm());
        }
    }
}
