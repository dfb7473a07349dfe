//! Terrain-adaptive arm angles: raise the front arms over the tallest
//! obstacle ahead plus the local slope, raise the rear arms on descents.

use crate::geom::wrap_angle;
use crate::perception::{fit_plane, FitMethod};
use crate::sensors::PointCloud;
use crate::world::UgvState;

/// Slopes shallower than this leave the rear arms at the default angle.
const DESCENT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmCommand {
    pub front_angle: f64,
    pub rear_angle: f64,
    /// Payload mode: angles limited to [0, pi/2].
    pub restricted: bool,
}

impl ArmCommand {
    fn neutral(restricted: bool) -> Self {
        Self {
            front_angle: 0.0,
            rear_angle: 0.0,
            restricted,
        }
    }
}

fn limit(angle: f64, restricted: bool) -> f64 {
    if restricted {
        angle.clamp(0.0, std::f64::consts::FRAC_PI_2)
    } else {
        wrap_angle(angle)
    }
}

/// Computes arm angles from a terrain patch in the vehicle frame (origin at
/// the ground contact under the body centre, x forward, z up). The front
/// angle aims over the tallest point within `lookahead` ahead and adds the
/// patch slope; the rear angle rises only when the patch descends.
pub fn compute_arm_angles(patch: &PointCloud, ugv: &UgvState, lookahead: f64) -> ArmCommand {
    let restricted = ugv.carrying_payload;
    if patch.is_empty() {
        log::warn!("empty terrain patch; commanding neutral arm angles");
        return ArmCommand::neutral(restricted);
    }
    assert!(lookahead > 0.0, "lookahead must be positive");

    let peak = patch
        .points
        .iter()
        .filter(|p| p.x > 0.0 && p.x <= lookahead)
        .map(|p| p.z)
        .fold(0.0f64, f64::max);

    // Pitch of the local plane: positive when the ground rises ahead.
    let slope = match fit_plane(&patch.points, FitMethod::LeastSquares) {
        Ok(plane) => (-plane.normal.x).atan2(plane.normal.z),
        Err(_) => {
            log::warn!("degenerate terrain patch; assuming level ground");
            0.0
        }
    };

    let rear = if slope < -DESCENT_TOLERANCE { -slope } else { 0.0 };
    ArmCommand {
        front_angle: limit(peak.atan2(lookahead) + slope, restricted),
        rear_angle: limit(rear, restricted),
        restricted,
    }
}
