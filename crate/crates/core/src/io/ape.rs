//! Absolute position error against ground truth with optional rigid
//! alignment.

use super::IoError;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

/// Timestamped pose sample of either trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t_ns: i64,
    pub position: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// Closed-form least-squares SE(3) alignment (no scale; metric scale is
    /// observable through the IMU).
    Se3,
    /// Compare trajectories in their native frames.
    None,
}

/// Translational error statistics after optional alignment.
#[derive(Debug, Clone)]
pub struct ApeReport {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub count: usize,
    /// Alignment applied to the estimate before differencing.
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

/// Interpolate the reference trajectory at `t_ns` (linear position, spherical
/// linear attitude). `None` outside the span.
fn interpolate(truth: &[TrajectorySample], t_ns: i64) -> Option<(Vector3<f64>, UnitQuaternion<f64>)> {
    if truth.is_empty() || t_ns < truth[0].t_ns || t_ns > truth[truth.len() - 1].t_ns {
        return None;
    }
    let idx = truth.partition_point(|s| s.t_ns <= t_ns);
    if idx == 0 {
        return Some((truth[0].position, truth[0].attitude));
    }
    if idx >= truth.len() {
        let last = &truth[truth.len() - 1];
        return Some((last.position, last.attitude));
    }
    let a = &truth[idx - 1];
    let b = &truth[idx];
    let span = (b.t_ns - a.t_ns) as f64;
    let w = (t_ns - a.t_ns) as f64 / span;
    let pos = a.position * (1.0 - w) + b.position * w;
    let att = a.attitude.slerp(&b.attitude, w);
    Some((pos, att))
}

/// Closed-form least-squares rotation+translation taking `src` onto `dst`.
fn umeyama_se3(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> (Rotation3<f64>, Vector3<f64>) {
    let n = src.len() as f64;
    let c_src = src.iter().sum::<Vector3<f64>>() / n;
    let c_dst = dst.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst.iter()) {
        h += (d - c_dst) * (s - c_src).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rot = Rotation3::from_matrix_unchecked(u * d * v_t);
    let trans = c_dst - rot * c_src;
    (rot, trans)
}

/// Absolute position error of `estimate` against `truth`.
///
/// Ground truth is interpolated to the estimate timestamps; samples before
/// `start_cutoff_s` (measured from the first estimate timestamp) are
/// discarded before alignment and statistics.
pub fn compute_ape(
    estimate: &[TrajectorySample],
    truth: &[TrajectorySample],
    align: AlignMode,
    start_cutoff_s: f64,
) -> Result<ApeReport, IoError> {
    if estimate.is_empty() {
        return Err(IoError::TooFewSamples { needed: 2, got: 0 });
    }
    let t0 = estimate[0].t_ns;
    let cutoff_ns = t0 + (start_cutoff_s * 1e9) as i64;
    let mut est_pts = Vec::new();
    let mut ref_pts = Vec::new();
    for s in estimate {
        if s.t_ns < cutoff_ns {
            continue;
        }
        if let Some((p, _)) = interpolate(truth, s.t_ns) {
            est_pts.push(s.position);
            ref_pts.push(p);
        }
    }
    if est_pts.len() < 2 {
        return if est_pts.is_empty() {
            Err(IoError::NoTemporalOverlap)
        } else {
            Err(IoError::TooFewSamples { needed: 2, got: est_pts.len() })
        };
    }
    let (rot, trans) = match align {
        AlignMode::Se3 => umeyama_se3(&est_pts, &ref_pts),
        AlignMode::None => (Rotation3::identity(), Vector3::zeros()),
    };
    let mut errors: Vec<f64> = est_pts
        .iter()
        .zip(ref_pts.iter())
        .map(|(e, r)| ((rot * e + trans) - r).norm())
        .collect();
    let count = errors.len();
    let sum_sq: f64 = errors.iter().map(|e| e * e).sum();
    let rmse = (sum_sq / count as f64).sqrt();
    let mean = errors.iter().sum::<f64>() / count as f64;
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if count % 2 == 0 {
        0.5 * (errors[count / 2 - 1] + errors[count / 2])
    } else {
        errors[count / 2]
    };
    let max = *errors.last().unwrap();
    Ok(ApeReport { rmse, mean, median, max, count, rotation: rot, translation: trans })
}

/// Path length of a trajectory (sum of consecutive position distances).
pub fn path_length(samples: &[TrajectorySample]) -> f64 {
    samples
        .windows(2)
        .map(|w| (w[1].position - w[0].position).norm())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn circle_trajectory(n: usize, offset: Vector3<f64>, rot: Option<Rotation3<f64>>) -> Vec<TrajectorySample> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 0.1;
                let p = Vector3::new((0.5 * t).cos() * 3.0, (0.5 * t).sin() * 3.0, 0.2 * t);
                let p = rot.map(|r| r * p).unwrap_or(p) + offset;
                TrajectorySample {
                    t_ns: (t * 1e9) as i64,
                    position: p,
                    attitude: UnitQuaternion::from_scaled_axis(Vector3::new(0.0, 0.0, 0.5 * t)),
                }
            })
            .collect()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let traj = circle_trajectory(100, Vector3::zeros(), None);
        let report = compute_ape(&traj, &traj, AlignMode::None, 0.0).unwrap();
        assert_eq!(report.rmse, 0.0);
        assert_eq!(report.max, 0.0);
        assert_eq!(report.count, 100);
    }

    #[test]
    fn rigid_offset_is_removed_by_alignment() {
        let truth = circle_trajectory(100, Vector3::zeros(), None);
        let est = circle_trajectory(
            100,
            Vector3::new(5.0, -2.0, 1.0),
            Some(Rotation3::from_scaled_axis(Vector3::new(0.0, 0.0, 0.7))),
        );
        let aligned = compute_ape(&est, &truth, AlignMode::Se3, 0.0).unwrap();
        assert!(aligned.rmse < 1e-10, "aligned rmse {}", aligned.rmse);
        let raw = compute_ape(&est, &truth, AlignMode::None, 0.0).unwrap();
        assert!(raw.rmse > 1.0);
    }

    #[test]
    fn constant_offset_without_alignment_is_the_offset() {
        let truth = circle_trajectory(50, Vector3::zeros(), None);
        let est = circle_trajectory(50, Vector3::new(0.1, 0.0, 0.0), None);
        let report = compute_ape(&est, &truth, AlignMode::None, 0.0).unwrap();
        assert_relative_eq!(report.rmse, 0.1, epsilon = 1e-12);
        assert_relative_eq!(report.mean, 0.1, epsilon = 1e-12);
        assert_relative_eq!(report.median, 0.1, epsilon = 1e-12);
        assert_relative_eq!(report.max, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn ape_invariant_to_common_rigid_transform() {
        let truth = circle_trajectory(80, Vector3::zeros(), None);
        let mut est = circle_trajectory(80, Vector3::zeros(), None);
        for s in &mut est {
            s.position += Vector3::new(0.05, -0.02, 0.01) * (s.t_ns as f64 * 1e-9);
        }
        let base = compute_ape(&est, &truth, AlignMode::Se3, 0.0).unwrap();

        let common_rot = Rotation3::from_scaled_axis(Vector3::new(0.3, -0.2, 0.9));
        let common_t = Vector3::new(-4.0, 2.0, 7.0);
        let apply = |traj: &[TrajectorySample]| -> Vec<TrajectorySample> {
            traj.iter()
                .map(|s| TrajectorySample {
                    t_ns: s.t_ns,
                    position: common_rot * s.position + common_t,
                    attitude: s.attitude,
                })
                .collect()
        };
        let moved = compute_ape(&apply(&est), &apply(&truth), AlignMode::Se3, 0.0).unwrap();
        assert_relative_eq!(base.rmse, moved.rmse, epsilon = 1e-10);
    }

    #[test]
    fn start_cutoff_discards_the_transient() {
        let truth = circle_trajectory(100, Vector3::zeros(), None);
        let mut est = circle_trajectory(100, Vector3::zeros(), None);
        // Corrupt the first two seconds.
        for s in &mut est {
            if s.t_ns < 2_000_000_000 {
                s.position += Vector3::new(3.0, 0.0, 0.0);
            }
        }
        let full = compute_ape(&est, &truth, AlignMode::None, 0.0).unwrap();
        let cut = compute_ape(&est, &truth, AlignMode::None, 2.0).unwrap();
        assert!(full.max > 2.9);
        assert!(cut.max < 1e-12);
    }

    #[test]
    fn disjoint_time_ranges_error() {
        let truth = circle_trajectory(10, Vector3::zeros(), None);
        let mut est = circle_trajectory(10, Vector3::zeros(), None);
        for s in &mut est {
            s.t_ns += 100_000_000_000;
        }
        assert!(matches!(
            compute_ape(&est, &truth, AlignMode::None, 0.0),
            Err(IoError::NoTemporalOverlap)
        ));
    }
}
