//! Touchdown and detachment verification rules.

use serde::{Deserialize, Serialize};

use crate::perception::{Plane, TrackEstimate};

use super::MissionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictOutcome {
    Success,
    Failure,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEvidence {
    /// Vehicle-to-ground-plane distance when release was commanded, m.
    pub clearance: f64,
    /// Head-to-vehicle separation samples collected during retraction, m.
    pub separation_series: Vec<f64>,
    pub ugv_stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentVerdict {
    pub outcome: VerdictOutcome,
    pub evidence: VerdictEvidence,
}

/// Ground-plane-distance rule: landed iff the estimated vehicle reference
/// point is within `threshold` of the fitted ground plane.
pub fn verify_touchdown(
    ugv_estimate: &TrackEstimate,
    ground: &Plane,
    threshold: f64,
) -> Result<bool, MissionError> {
    let norm = ground.normal.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(MissionError::DegeneratePlane(format!(
            "normal length {norm}"
        )));
    }
    Ok(ground.signed_distance(&ugv_estimate.position) <= threshold)
}

/// Separation-growth rule over the most recent `window` samples: success iff
/// the window is full, strictly increasing, ends above `min_sep`, and the
/// vehicle held still; failure once the window is full and any condition
/// fails; undecided before that.
pub fn verify_detachment(
    separation_series: &[f64],
    ugv_stationary: bool,
    min_sep: f64,
    window: usize,
) -> VerdictOutcome {
    let window = window.max(2);
    if separation_series.len() < window {
        return VerdictOutcome::Undecided;
    }
    let recent = &separation_series[separation_series.len() - window..];
    let increasing = recent.windows(2).all(|w| w[1] > w[0]);
    let clear = *recent.last().expect("window is non-empty") > min_sep;
    if increasing && clear && ugv_stationary {
        VerdictOutcome::Success
    } else {
        VerdictOutcome::Failure
    }
}
