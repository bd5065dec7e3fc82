//! Analytic, twice-differentiable survey trajectories.
//!
//! Every pattern is a closed planar curve traversed at constant parameter
//! rate after a smooth spin-up: the robot holds still for one second, ramps
//! in over two seconds (quintic time warp, so accelerations stay continuous)
//! and then loops. The heading follows the path tangent, which matches a
//! camera pointing in the direction of motion.

use nalgebra::{UnitQuaternion, Vector3};

/// Anything that can report a body pose as a smooth function of time.
pub trait PoseProvider {
    fn pose(&self, t: f64) -> (Vector3<f64>, UnitQuaternion<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryPattern {
    /// Rounded rectangle (quartic superellipse) hugging the walls.
    Rectangle,
    /// Lissajous figure-8 through the middle of the tank.
    Figure8,
    /// Strongly elongated oval along the tank length.
    Lengthwise,
}

impl TrajectoryPattern {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "rectangle" => Some(Self::Rectangle),
            "figure8" => Some(Self::Figure8),
            "lengthwise" => Some(Self::Lengthwise),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rectangle => "rectangle",
            Self::Figure8 => "figure8",
            Self::Lengthwise => "lengthwise",
        }
    }
}

/// Start of the ramp-in (stationary before), seconds.
const RAMP_START: f64 = 1.0;
/// End of the ramp-in (full speed after), seconds.
const RAMP_END: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct SimTrajectory {
    pub pattern: TrajectoryPattern,
    /// Seconds per lap at full speed.
    pub period: f64,
    pub laps: u32,
    /// Path center in tank coordinates.
    pub center: Vector3<f64>,
    /// Half extents of the pattern along x and y, meters.
    pub half_extent: (f64, f64),
}

impl SimTrajectory {
    pub fn new(pattern: TrajectoryPattern, period: f64, laps: u32) -> Self {
        assert!(period > 1.0 && laps >= 1);
        let half_extent = match pattern {
            TrajectoryPattern::Rectangle => (3.5, 2.0),
            TrajectoryPattern::Figure8 => (3.2, 1.8),
            TrajectoryPattern::Lengthwise => (4.0, 0.8),
        };
        Self {
            pattern,
            period,
            laps,
            center: Vector3::new(5.0, 3.0, 0.75),
            half_extent,
        }
    }

    /// Total duration: the spin-up offset plus the requested laps.
    pub fn duration(&self) -> f64 {
        self.laps as f64 * self.period + 0.5 * (RAMP_START + RAMP_END)
    }

    /// Time warp: effective path time as a C2 function of wall time.
    fn tau(t: f64) -> f64 {
        if t <= RAMP_START {
            0.0
        } else if t >= RAMP_END {
            t - 0.5 * (RAMP_START + RAMP_END)
        } else {
            let span = RAMP_END - RAMP_START;
            let x = (t - RAMP_START) / span;
            let x2 = x * x;
            // Integral of the quintic smoothstep 6x^5 - 15x^4 + 10x^3.
            span * (x2 * x2 * (x2 - 3.0 * x + 2.5))
        }
    }

    /// Planar path and its tangent as functions of the phase angle.
    fn path(&self, phi: f64) -> (f64, f64, f64, f64) {
        let (a, b) = self.half_extent;
        match self.pattern {
            TrajectoryPattern::Rectangle | TrajectoryPattern::Lengthwise => {
                // Quartic superellipse in polar form.
                let (c, s) = (phi.cos(), phi.sin());
                let g = c.powi(4) / a.powi(4) + s.powi(4) / b.powi(4);
                let gp = (-4.0 * c.powi(3) * s) / a.powi(4) + (4.0 * s.powi(3) * c) / b.powi(4);
                let rho = g.powf(-0.25);
                let rho_p = -0.25 * g.powf(-1.25) * gp;
                let x = rho * c;
                let y = rho * s;
                let dx = rho_p * c - rho * s;
                let dy = rho_p * s + rho * c;
                (x, y, dx, dy)
            }
            TrajectoryPattern::Figure8 => {
                let x = a * phi.sin();
                let y = 0.5 * b * (2.0 * phi).sin();
                let dx = a * phi.cos();
                let dy = b * (2.0 * phi).cos();
                (x, y, dx, dy)
            }
        }
    }

    /// Body pose at wall time `t`: world position and attitude (body to
    /// world). Heading follows the path tangent; roll and pitch stay zero.
    pub fn pose(&self, t: f64) -> (Vector3<f64>, UnitQuaternion<f64>) {
        let phi = std::f64::consts::TAU * Self::tau(t) / self.period;
        let (x, y, dx, dy) = self.path(phi);
        let position = self.center + Vector3::new(x, y, 0.0);
        let yaw = dy.atan2(dx);
        let attitude = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
        (position, attitude)
    }
}

impl PoseProvider for SimTrajectory {
    fn pose(&self, t: f64) -> (Vector3<f64>, UnitQuaternion<f64>) {
        SimTrajectory::pose(self, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn holds_still_then_ramps_smoothly() {
        let traj = SimTrajectory::new(TrajectoryPattern::Rectangle, 50.0, 3);
        let (p0, q0) = traj.pose(0.0);
        let (p1, q1) = traj.pose(0.99);
        assert_relative_eq!(p0, p1, epsilon = 1e-12);
        assert!(q0.angle_to(&q1) < 1e-12);
        // Speed is continuous through the ramp: sample the numeric velocity.
        let h = 1e-4;
        let speed = |t: f64| {
            let (a, _) = traj.pose(t + h);
            let (b, _) = traj.pose(t - h);
            (a - b).norm() / (2.0 * h)
        };
        assert!(speed(1.01) < 0.01);
        let full = speed(10.0);
        assert!(full > 0.2, "cruise speed {full}");
        // Monotone ramp.
        assert!(speed(1.5) < speed(2.0));
        assert!(speed(2.0) < speed(2.9));
    }

    #[test]
    fn patterns_stay_inside_the_tank() {
        for pattern in [
            TrajectoryPattern::Rectangle,
            TrajectoryPattern::Figure8,
            TrajectoryPattern::Lengthwise,
        ] {
            let traj = SimTrajectory::new(pattern, 60.0, 1);
            for i in 0..2000 {
                let t = traj.duration() * i as f64 / 2000.0;
                let (p, _) = traj.pose(t);
                assert!(p.x > 0.5 && p.x < 9.5, "{pattern:?} x = {}", p.x);
                assert!(p.y > 0.5 && p.y < 5.5, "{pattern:?} y = {}", p.y);
                assert_relative_eq!(p.z, 0.75);
            }
        }
    }

    #[test]
    fn speed_never_vanishes_at_cruise() {
        for pattern in [
            TrajectoryPattern::Rectangle,
            TrajectoryPattern::Figure8,
            TrajectoryPattern::Lengthwise,
        ] {
            let traj = SimTrajectory::new(pattern, 50.0, 1);
            let h = 1e-4;
            for i in 0..500 {
                let t = RAMP_END + (traj.duration() - RAMP_END - 0.1) * i as f64 / 500.0;
                let (a, _) = traj.pose(t + h);
                let (b, _) = traj.pose(t - h);
                let speed = (a - b).norm() / (2.0 * h);
                assert!(speed > 0.05, "{pattern:?} speed {speed} at t = {t}");
            }
        }
    }

    #[test]
    fn heading_follows_the_velocity_direction() {
        let traj = SimTrajectory::new(TrajectoryPattern::Figure8, 50.0, 1);
        let h = 1e-5;
        for t in [5.0, 12.3, 20.7, 33.1] {
            let (pa, _) = traj.pose(t + h);
            let (pb, _) = traj.pose(t - h);
            let v = (pa - pb) / (2.0 * h);
            let (_, q) = traj.pose(t);
            let forward = q * Vector3::x();
            let cos = forward.dot(&v.normalize());
            assert!(cos > 0.999999, "heading misaligned: cos = {cos}");
        }
    }
}
