//! Trajectory tracking for the carrier (spline feedforward plus per-axis
//! PID) and the winch rate loop.

use crate::geom::{clamp_norm, Vec3};

use super::bspline::BSpline;
use super::pid::{pid_step, PidGains, PidState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand {
    pub linear: Vec3,
    pub yaw_rate: f64,
}

impl VelocityCommand {
    pub fn zero() -> Self {
        Self {
            linear: Vec3::zeros(),
            yaw_rate: 0.0,
        }
    }
}

/// Per-axis position gains for carrier tracking.
pub fn default_tracking_gains() -> PidGains {
    PidGains::new(1.2, 0.0, 0.1)
}

/// Winch rate-loop gains, tuned so a step on the 0.2 s first-order drum
/// plant settles within 2% in well under two seconds without overshoot
/// (closed-loop poles at about -3.5 and -11.5 per second).
pub fn default_winch_gains() -> PidGains {
    PidGains::new(2.0, 8.0, 0.0)
}

/// Tracks a spline with velocity feedforward and one PID per axis.
#[derive(Debug, Clone)]
pub struct TrajectoryTracker {
    gains: PidGains,
    axes: [PidState; 3],
    max_speed: f64,
}

impl TrajectoryTracker {
    pub fn new(gains: PidGains, max_speed: f64) -> Self {
        Self {
            gains,
            axes: Default::default(),
            max_speed,
        }
    }

    /// Velocity command toward the spline point at time `t`.
    pub fn track(&mut self, position: &Vec3, spline: &BSpline, t: f64, dt: f64) -> VelocityCommand {
        let error = spline.position(t) - position;
        let mut correction = Vec3::zeros();
        for axis in 0..3 {
            correction[axis] = pid_step(&mut self.axes[axis], &self.gains, error[axis], dt);
        }
        VelocityCommand {
            linear: clamp_norm(spline.velocity(t) + correction, self.max_speed),
            yaw_rate: 0.0,
        }
    }

    /// Command toward a fixed point (no feedforward).
    pub fn track_point(&mut self, position: &Vec3, target: &Vec3, dt: f64) -> VelocityCommand {
        let error = target - position;
        let mut correction = Vec3::zeros();
        for axis in 0..3 {
            correction[axis] = pid_step(&mut self.axes[axis], &self.gains, error[axis], dt);
        }
        VelocityCommand {
            linear: clamp_norm(correction, self.max_speed),
            yaw_rate: 0.0,
        }
    }

    pub fn reset(&mut self) {
        for axis in &mut self.axes {
            axis.reset();
        }
    }
}

/// One update of the winch rate loop: PID on the rate error. Actuator limits
/// are enforced through the gains' output clamp.
pub fn winch_rate_command(
    state: &mut PidState,
    gains: &PidGains,
    target_rate: f64,
    measured_rate: f64,
    dt: f64,
) -> f64 {
    pid_step(state, gains, target_rate - measured_rate, dt)
}
