//! The mission transition function. Pure: consumes the current state plus
//! observations and yields the next state, actuator directives and events.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::perception::DeploymentZone;

use super::phase::{transition_allowed, MissionMode, Phase};
use super::verify::{DeploymentVerdict, VerdictOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub mode: MissionMode,
    /// Hard ceiling on vehicle-to-ground clearance at release, m.
    pub d_min: f64,
    /// Landed iff estimated clearance falls to this, m.
    pub touchdown_threshold: f64,
    /// Separation the head must exceed for a verified release, m.
    pub min_separation: f64,
    pub max_attempts: u32,
    /// Winch payout rate while lowering (and retraction magnitude), m/s.
    pub descent_rate: f64,
    /// Consecutive separation samples needed for a verdict.
    pub verify_window: usize,
    /// Seconds between separation samples.
    pub verify_sample_period: f64,
    /// Give up waiting for a verdict after this long, s.
    pub verify_timeout: f64,
    /// Vehicle speed below which it counts as stationary, m/s.
    pub stationary_speed: f64,
    /// Servo alignment goal before reattachment, px.
    pub align_threshold_px: f64,
    /// Carrier position error ending PositionOverZone, m.
    pub position_tolerance: f64,
    /// Hover altitude above the zone during deployment, m.
    pub deploy_altitude: f64,
    /// Altitude for scanning and transit, m.
    pub scan_altitude: f64,
    /// Ground traverse waypoints, relative to the zone centre, m.
    pub ground_ops_waypoints: Vec<[f64; 3]>,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            mode: MissionMode::Detached,
            d_min: 0.05,
            touchdown_threshold: 0.05,
            min_separation: 0.05,
            max_attempts: 3,
            descent_rate: 0.2,
            verify_window: 10,
            verify_sample_period: 0.2,
            verify_timeout: 6.0,
            stationary_speed: 0.01,
            align_threshold_px: 5.0,
            position_tolerance: 0.05,
            deploy_altitude: 2.5,
            scan_altitude: 4.0,
            ground_ops_waypoints: vec![[0.5, 0.0, 0.0], [0.5, 0.5, 0.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionState {
    pub phase: Phase,
    pub entered_at: f64,
    /// Times LowerTether has been entered.
    pub attempt_count: u32,
}

impl MissionState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Idle,
            entered_at: 0.0,
            attempt_count: 0,
        }
    }
}

impl Default for MissionState {
    fn default() -> Self {
        Self::new()
    }
}

/// What the sequencer wants from the winch this step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WinchDirective {
    Hold,
    /// Pay out at the given rate, m/s.
    PayOut(f64),
    /// Retract at the given rate magnitude, m/s.
    Retract(f64),
    /// Attached-mode ground ops: keep the tether slack while the vehicle
    /// roams.
    MaintainSlack,
}

/// Actuator-level directives; motion planning for the carrier and vehicle is
/// derived from the phase by the runner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionCommands {
    /// Magnet switch request, if any this step.
    pub epm: Option<bool>,
    pub winch: WinchDirective,
    /// Some(true) pauses map accumulation, Some(false) resumes it.
    pub pause_map: Option<bool>,
}

impl MissionCommands {
    fn none() -> Self {
        Self {
            epm: None,
            winch: WinchDirective::Hold,
            pause_map: None,
        }
    }
}

/// Everything the sequencer can see this step. Fields irrelevant to the
/// current phase are ignored.
#[derive(Debug, Clone, Default)]
pub struct Observations<'a> {
    pub now: f64,
    /// Estimated vehicle-bottom distance to the fitted ground plane, m.
    pub clearance: Option<f64>,
    pub scan_complete: bool,
    pub zone: Option<&'a DeploymentZone>,
    /// Zone search ran and found nothing.
    pub zone_search_failed: bool,
    /// Carrier distance to its current goal, m.
    pub position_error: Option<f64>,
    pub detach_verdict: Option<&'a DeploymentVerdict>,
    /// External or scripted release request (normal missions derive the
    /// request from touchdown detection instead).
    pub detach_requested: bool,
    pub head_stowed: bool,
    pub head_attached: bool,
    pub ground_ops_complete: bool,
    pub ugv_at_pickup: bool,
    pub alignment_error_px: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum MissionEvent {
    PhaseEntered {
        from: Phase,
        to: Phase,
    },
    /// Release blocked by the clearance constraint.
    DetachRefused {
        clearance: f64,
        d_min: f64,
    },
    DetachCommanded {
        clearance: f64,
    },
    VerdictRecorded {
        outcome: VerdictOutcome,
    },
    ReattemptScheduled {
        attempt: u32,
    },
    AttemptsExhausted {
        attempts: u32,
    },
    MissionFailed {
        reason: String,
    },
    ReturnSignal,
    ReattachCaptured,
    IllegalObservation {
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionTransition {
    pub next: MissionState,
    pub commands: MissionCommands,
    pub events: Vec<MissionEvent>,
}

struct Builder {
    state: MissionState,
    commands: MissionCommands,
    events: Vec<MissionEvent>,
}

impl Builder {
    fn new(state: &MissionState) -> Self {
        Self {
            state: state.clone(),
            commands: MissionCommands::none(),
            events: Vec::new(),
        }
    }

    fn enter(&mut self, to: Phase, now: f64) {
        let from = self.state.phase;
        debug_assert!(transition_allowed(from, to), "illegal {from:?} -> {to:?}");
        self.state.phase = to;
        self.state.entered_at = now;
        self.events.push(MissionEvent::PhaseEntered { from, to });
        if to == Phase::LowerTether {
            self.state.attempt_count += 1;
            self.commands.pause_map = Some(true);
        }
        if to == Phase::GroundOps {
            self.commands.pause_map = Some(false);
        }
    }

    fn abort(&mut self, now: f64, detail: String) {
        self.events.push(MissionEvent::IllegalObservation { detail });
        self.enter(Phase::Aborted, now);
    }

    fn finish(self) -> MissionTransition {
        MissionTransition {
            next: self.state,
            commands: self.commands,
            events: self.events,
        }
    }
}

/// Advances the mission by one decision step.
pub fn mission_step(
    state: &MissionState,
    config: &MissionConfig,
    obs: &Observations,
) -> MissionTransition {
    let mut b = Builder::new(state);
    let now = obs.now;
    match state.phase {
        Phase::Idle => b.enter(Phase::ScanAndMap, now),
        Phase::ScanAndMap => {
            if obs.scan_complete {
                b.enter(Phase::SelectZone, now);
            }
        }
        Phase::SelectZone => {
            if obs.zone.is_some() {
                b.enter(Phase::PositionOverZone, now);
            } else if obs.zone_search_failed {
                b.events.push(MissionEvent::MissionFailed {
                    reason: "no deployment zone found".into(),
                });
                b.enter(Phase::Aborted, now);
            }
        }
        Phase::PositionOverZone => {
            if obs.zone.is_none() {
                b.abort(now, "positioning without a selected zone".into());
            } else if obs.position_error.is_some_and(|e| e <= config.position_tolerance) {
                b.enter(Phase::LowerTether, now);
            }
        }
        Phase::LowerTether => lower_tether(&mut b, config, obs),
        Phase::VerifyTouchdown => verify_touchdown_phase(&mut b, config, obs),
        Phase::Detach => {
            b.commands.winch = WinchDirective::Retract(config.descent_rate);
            if obs.head_stowed {
                b.enter(Phase::GroundOps, now);
            }
        }
        Phase::GroundOps => {
            b.commands.winch = match config.mode {
                MissionMode::Attached => WinchDirective::MaintainSlack,
                MissionMode::Detached => WinchDirective::Hold,
            };
            if obs.ground_ops_complete {
                b.enter(Phase::ReturnAndSignal, now);
            }
        }
        Phase::ReturnAndSignal => {
            if config.mode == MissionMode::Attached {
                b.commands.winch = WinchDirective::MaintainSlack;
            }
            if obs.ugv_at_pickup {
                b.events.push(MissionEvent::ReturnSignal);
                b.enter(Phase::AlignForRetrieval, now);
            }
        }
        Phase::AlignForRetrieval => {
            if obs
                .alignment_error_px
                .is_some_and(|e| e <= config.align_threshold_px)
            {
                match config.mode {
                    MissionMode::Detached => {
                        b.commands.epm = Some(true);
                        b.enter(Phase::Reattach, now);
                    }
                    MissionMode::Attached => b.enter(Phase::Retract, now),
                }
            }
        }
        Phase::Reattach => {
            b.commands.epm = Some(true);
            b.commands.winch = WinchDirective::PayOut(config.descent_rate);
            if obs.head_attached {
                b.events.push(MissionEvent::ReattachCaptured);
                b.enter(Phase::Retract, now);
            }
        }
        Phase::Retract => {
            b.commands.winch = WinchDirective::Retract(config.descent_rate);
            if obs.head_stowed {
                b.enter(Phase::Done, now);
            }
        }
        Phase::Done | Phase::Aborted => {}
    }
    b.finish()
}

fn lower_tether(b: &mut Builder, config: &MissionConfig, obs: &Observations) {
    b.commands.winch = WinchDirective::PayOut(config.descent_rate);
    let touchdown = obs
        .clearance
        .is_some_and(|c| c <= config.touchdown_threshold);
    if !(touchdown || obs.detach_requested) {
        return;
    }
    // Hard constraint: never begin the release sequence above d_min.
    let clearance = obs.clearance.unwrap_or(f64::INFINITY);
    if clearance > config.d_min {
        b.events.push(MissionEvent::DetachRefused {
            clearance,
            d_min: config.d_min,
        });
        return;
    }
    if config.mode == MissionMode::Detached {
        b.commands.epm = Some(false);
        b.events.push(MissionEvent::DetachCommanded { clearance });
    }
    b.enter(Phase::VerifyTouchdown, obs.now);
}

fn verify_touchdown_phase(b: &mut Builder, config: &MissionConfig, obs: &Observations) {
    let now = obs.now;
    if config.mode == MissionMode::Attached {
        // No release to verify; touchdown was confirmed on entry.
        b.enter(Phase::GroundOps, now);
        return;
    }
    b.commands.winch = WinchDirective::Retract(config.descent_rate);
    let outcome = obs.detach_verdict.map(|v| v.outcome);
    let timed_out = now - b.state.entered_at > config.verify_timeout;
    match outcome {
        Some(VerdictOutcome::Success) => {
            b.events.push(MissionEvent::VerdictRecorded {
                outcome: VerdictOutcome::Success,
            });
            b.enter(Phase::Detach, now);
        }
        Some(VerdictOutcome::Failure) => {
            b.events.push(MissionEvent::VerdictRecorded {
                outcome: VerdictOutcome::Failure,
            });
            reattempt(b, config, now);
        }
        Some(VerdictOutcome::Undecided) | None => {
            if timed_out {
                b.events.push(MissionEvent::VerdictRecorded {
                    outcome: VerdictOutcome::Failure,
                });
                reattempt(b, config, now);
            }
        }
    }
}

fn reattempt(b: &mut Builder, config: &MissionConfig, now: f64) {
    if b.state.attempt_count < config.max_attempts {
        // Re-arm the magnet: if the release never happened the command is a
        // no-op; if the head came free it recaptures on contact.
        b.commands.epm = Some(true);
        b.events.push(MissionEvent::ReattemptScheduled {
            attempt: b.state.attempt_count + 1,
        });
        b.enter(Phase::LowerTether, now);
    } else {
        b.events.push(MissionEvent::AttemptsExhausted {
            attempts: b.state.attempt_count,
        });
        b.enter(Phase::Aborted, now);
    }
}

/// Waypoints for the ground traverse in world coordinates.
pub fn ground_ops_route(config: &MissionConfig, zone_center: &Vec3) -> Vec<Vec3> {
    config
        .ground_ops_waypoints
        .iter()
        .map(|w| zone_center + Vec3::new(w[0], w[1], w[2]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::VerdictEvidence;

    fn state(phase: Phase, attempt_count: u32) -> MissionState {
        MissionState {
            phase,
            entered_at: 0.0,
            attempt_count,
        }
    }

    fn verdict(outcome: VerdictOutcome) -> DeploymentVerdict {
        DeploymentVerdict {
            outcome,
            evidence: VerdictEvidence {
                clearance: 0.04,
                separation_series: vec![],
                ugv_stationary: true,
            },
        }
    }

    #[test]
    fn touchdown_within_clearance_advances_and_releases() {
        let obs = Observations {
            now: 10.0,
            clearance: Some(0.04),
            ..Default::default()
        };
        let t = mission_step(&state(Phase::LowerTether, 1), &MissionConfig::default(), &obs);
        assert_eq!(t.next.phase, Phase::VerifyTouchdown);
        assert_eq!(t.commands.epm, Some(false));
        assert!(t
            .events
            .iter()
            .any(|e| matches!(e, MissionEvent::DetachCommanded { .. })));
    }

    #[test]
    fn detach_request_above_clearance_is_refused() {
        let obs = Observations {
            now: 10.0,
            clearance: Some(0.2),
            detach_requested: true,
            ..Default::default()
        };
        let t = mission_step(&state(Phase::LowerTether, 1), &MissionConfig::default(), &obs);
        assert_eq!(t.next.phase, Phase::LowerTether);
        assert_eq!(t.commands.epm, None);
        assert!(matches!(t.commands.winch, WinchDirective::PayOut(_)));
        assert!(t
            .events
            .iter()
            .any(|e| matches!(e, MissionEvent::DetachRefused { clearance, .. } if *clearance == 0.2)));
    }

    #[test]
    fn failed_verdict_schedules_reattempt() {
        let v = verdict(VerdictOutcome::Failure);
        let obs = Observations {
            now: 12.0,
            detach_verdict: Some(&v),
            ..Default::default()
        };
        let t = mission_step(
            &state(Phase::VerifyTouchdown, 1),
            &MissionConfig::default(),
            &obs,
        );
        assert_eq!(t.next.phase, Phase::LowerTether);
        assert_eq!(t.next.attempt_count, 2);
        assert_eq!(t.commands.epm, Some(true));
    }

    #[test]
    fn attempts_exhausted_aborts() {
        let v = verdict(VerdictOutcome::Failure);
        let obs = Observations {
            now: 12.0,
            detach_verdict: Some(&v),
            ..Default::default()
        };
        let t = mission_step(
            &state(Phase::VerifyTouchdown, 3),
            &MissionConfig::default(),
            &obs,
        );
        assert_eq!(t.next.phase, Phase::Aborted);
        assert!(t
            .events
            .iter()
            .any(|e| matches!(e, MissionEvent::AttemptsExhausted { attempts: 3 })));
    }

    #[test]
    fn verdict_timeout_counts_as_failure() {
        let obs = Observations {
            now: 100.0, // entered_at 0, timeout 6
            ..Default::default()
        };
        let t = mission_step(
            &state(Phase::VerifyTouchdown, 1),
            &MissionConfig::default(),
            &obs,
        );
        assert_eq!(t.next.phase, Phase::LowerTether);
        assert!(t
            .events
            .iter()
            .any(|e| matches!(
                e,
                MissionEvent::VerdictRecorded {
                    outcome: VerdictOutcome::Failure
                }
            )));
    }

    #[test]
    fn success_verdict_reaches_detach_then_ground_ops() {
        let v = verdict(VerdictOutcome::Success);
        let obs = Observations {
            now: 12.0,
            detach_verdict: Some(&v),
            ..Default::default()
        };
        let t = mission_step(
            &state(Phase::VerifyTouchdown, 1),
            &MissionConfig::default(),
            &obs,
        );
        assert_eq!(t.next.phase, Phase::Detach);

        let obs = Observations {
            now: 14.0,
            head_stowed: true,
            ..Default::default()
        };
        let t = mission_step(&t.next, &MissionConfig::default(), &obs);
        assert_eq!(t.next.phase, Phase::GroundOps);
        assert_eq!(t.commands.pause_map, Some(false));
    }

    #[test]
    fn lower_tether_entry_pauses_map() {
        let zone = DeploymentZone {
            center: Vec3::zeros(),
            plane: crate::perception::Plane {
                normal: Vec3::new(0.0, 0.0, 1.0),
                offset: 0.0,
                rms_residual: 0.0,
                inlier_count: 10,
            },
            distance_to_entry: 0.0,
            score: 0.0,
            anchor_index: 0,
        };
        let obs = Observations {
            now: 5.0,
            zone: Some(&zone),
            position_error: Some(0.01),
            ..Default::default()
        };
        let t = mission_step(
            &state(Phase::PositionOverZone, 0),
            &MissionConfig::default(),
            &obs,
        );
        assert_eq!(t.next.phase, Phase::LowerTether);
        assert_eq!(t.next.attempt_count, 1);
        assert_eq!(t.commands.pause_map, Some(true));
    }

    #[test]
    fn attached_mode_skips_detach_and_reattach() {
        let config = MissionConfig {
            mode: MissionMode::Attached,
            ..Default::default()
        };
        let obs = Observations {
            now: 1.0,
            ..Default::default()
        };
        let t = mission_step(&state(Phase::VerifyTouchdown, 1), &config, &obs);
        assert_eq!(t.next.phase, Phase::GroundOps);
        assert_eq!(t.commands.epm, None);

        let obs = Observations {
            now: 2.0,
            alignment_error_px: Some(2.0),
            ..Default::default()
        };
        let t = mission_step(&state(Phase::AlignForRetrieval, 1), &config, &obs);
        assert_eq!(t.next.phase, Phase::Retract);
        assert_eq!(t.commands.epm, None);
    }

    #[test]
    fn zone_search_failure_fails_the_mission() {
        let obs = Observations {
            now: 3.0,
            zone_search_failed: true,
            ..Default::default()
        };
        let t = mission_step(&state(Phase::SelectZone, 0), &MissionConfig::default(), &obs);
        assert_eq!(t.next.phase, Phase::Aborted);
        assert!(t
            .events
            .iter()
            .any(|e| matches!(e, MissionEvent::MissionFailed { .. })));
    }

    #[test]
    fn missing_zone_mid_positioning_aborts_with_diagnostic() {
        let obs = Observations {
            now: 3.0,
            position_error: Some(0.0),
            ..Default::default()
        };
        let t = mission_step(
            &state(Phase::PositionOverZone, 0),
            &MissionConfig::default(),
            &obs,
        );
        assert_eq!(t.next.phase, Phase::Aborted);
        assert!(t
            .events
            .iter()
            .any(|e| matches!(e, MissionEvent::IllegalObservation { .. })));
    }

    #[test]
    fn reattach_waits_for_capture() {
        let config = MissionConfig::default();
        let obs = Observations {
            now: 30.0,
            ..Default::default()
        };
        let t = mission_step(&state(Phase::Reattach, 1), &config, &obs);
        assert_eq!(t.next.phase, Phase::Reattach);
        assert_eq!(t.commands.epm, Some(true));

        let obs = Observations {
            now: 31.0,
            head_attached: true,
            ..Default::default()
        };
        let t = mission_step(&state(Phase::Reattach, 1), &config, &obs);
        assert_eq!(t.next.phase, Phase::Retract);
        assert!(t.events.contains(&MissionEvent::ReattachCaptured));
    }

    #[test]
    fn retract_finishes_when_stowed() {
        let obs = Observations {
            now: 40.0,
            head_stowed: true,
            ..Default::default()
        };
        let t = mission_step(&state(Phase::Retract, 1), &MissionConfig::default(), &obs);
        assert_eq!(t.next.phase, Phase::Done);
    }

    #[test]
    fn ground_route_is_zone_relative() {
        let config = MissionConfig::default();
        let route = ground_ops_route(&config, &Vec3::new(2.0, 1.0, 0.3));
        assert_eq!(route.len(), config.ground_ops_waypoints.len());
        assert_eq!(route[0], Vec3::new(2.5, 1.0, 0.3));
    }
}
