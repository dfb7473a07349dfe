//! Controllers: B-spline trajectory generation with PID tracking for the
//! carrier, winch rate regulation, terrain-adaptive arm angles and
//! image-space servo alignment for retrieval.

mod arms;
mod bspline;
mod pid;
mod servo;
mod tracking;

pub use arms::{compute_arm_angles, ArmCommand};
pub use bspline::BSpline;
pub use pid::{pid_step, PidGains, PidState};
pub use servo::servo_alignment;
pub use tracking::{
    default_tracking_gains, default_winch_gains, winch_rate_command, TrajectoryTracker,
    VelocityCommand,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("need at least {needed} waypoints, got {got}")]
    TooFewWaypoints { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
