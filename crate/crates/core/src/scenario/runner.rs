//! Closed-loop execution of one scenario.
//!
//! The loop runs at the simulation rate. Each step it renders a depth frame
//! when one is due, refreshes the estimators, lets the mission sequencer
//! decide, turns its directives into actuator commands and advances the
//! world. Every decision consumes estimates rather than ground truth; truth
//! appears only in telemetry fields recorded for later analysis.

use std::collections::VecDeque;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::control::{
    servo_alignment, winch_rate_command, BSpline, PidState, TrajectoryTracker,
};
use crate::geom::{clamp_norm, wrap_angle, Vec3};
use crate::mission::{
    ground_ops_route, mission_step, verify_detachment, DeploymentVerdict, EventLog, EventLogEntry,
    MissionEvent, MissionState, MissionTransition, Observations, Phase, VerdictEvidence,
    VerdictOutcome, WinchDirective,
};
use crate::perception::{
    dbscan, estimate_normals, filter_above_plane, find_deployment_zone, fit_plane,
    fuse_head_estimate, segment_navigable, select_target_cluster, AccumulatedMap, Aoi, Cluster,
    ClusterWeights, DeploymentZone, FitMethod, Plane, RansacParams, TrackEstimate, ZoneParams,
};
use crate::sensors::{
    depth_to_cloud, length_from_encoder, project_point, read_encoder, render_depth,
    CameraIntrinsics, DepthNoise, Frame, PointCloud,
};
use crate::world::{
    Commands, Pose, Terrain, TetherHeadState, UavState, UgvState, WinchState, WorldEvent,
    WorldParams, WorldState,
};

use super::config::{ScenarioConfig, TerrainConfig};
use super::ScenarioError;

/// Waypoint arrival distance for the ground vehicle, m.
const WAYPOINT_TOLERANCE: f64 = 0.08;
/// How close the vehicle must return to the zone centre for pickup, m.
const PICKUP_TOLERANCE: f64 = 0.1;
/// Extra tether beyond the anchor-to-ground distance that marks a missed
/// capture during reattachment, m.
const REATTACH_SLACK_LIMIT: f64 = 0.3;
/// Tether pulled back in before retrying a missed capture, m.
const REATTACH_BACKOFF: f64 = 0.4;
/// Clusters further than this from the running vehicle estimate are ignored
/// when updating it, m. Tight enough that a centroid jump from merging with
/// nearby structure is rejected rather than stealing the lock.
const UGV_TRACK_GATE: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunOutcome {
    Success,
    Aborted,
    Timeout,
}

/// Everything a caller needs to judge a finished run without re-reading the
/// event log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub final_phase: String,
    pub attempt_count: u32,
    pub zone_center: Option<[f64; 3]>,
    /// Estimated clearance recorded when release was commanded, m.
    pub detach_clearance_estimated: Option<f64>,
    /// True clearance at the same instant, m.
    pub detach_clearance_true: Option<f64>,
    pub final_verdict: Option<VerdictOutcome>,
    pub reattach_captured: bool,
    /// Worst carrier hold error while the tether was out, m.
    pub peak_hold_error: f64,
    /// Largest realized carrier acceleration, m/s^2. The velocity clamp is
    /// the only dynamic limit, so this records what the run demanded.
    pub peak_carrier_accel: f64,
    /// Worst per-step vertical error of the head estimate while the camera
    /// was blacked out, m.
    pub max_blackout_vertical_error: Option<f64>,
    pub sim_time: f64,
    pub steps: u64,
    pub wall_time_s: f64,
    pub invariant_violations: Vec<String>,
    pub events_path: String,
    pub out_dir: String,
}

/// Runs one scenario to completion and writes `events.jsonl`, one trajectory
/// CSV per body and `report.json` into `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, ScenarioError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(ScenarioError::InvalidConfig(violations));
    }
    let started = Instant::now();
    let mut runner = Runner::new(config)?;
    let (outcome, final_phase) = runner.run()?;

    std::fs::create_dir_all(out_dir)?;
    let events_path = out_dir.join("events.jsonl");
    let mut events = std::fs::File::create(&events_path)?;
    writeln!(
        events,
        "{}",
        serde_json::json!({
            "schema": "marsupial-events/1",
            "name": config.name,
            "seed": config.seed,
        })
    )?;
    events.write_all(runner.log.to_jsonl().as_bytes())?;
    for (name, rows) in [
        ("uav.csv", &runner.traj_uav),
        ("head.csv", &runner.traj_head),
        ("ugv.csv", &runner.traj_ugv),
    ] {
        std::fs::write(out_dir.join(name), rows)?;
    }

    let report = RunReport {
        name: config.name.clone(),
        seed: config.seed,
        outcome,
        final_phase: final_phase.name().to_string(),
        attempt_count: runner.mission.attempt_count,
        zone_center: runner.zone.as_ref().map(|z| [z.center.x, z.center.y, z.center.z]),
        detach_clearance_estimated: runner.detach_clearance_est,
        detach_clearance_true: runner.detach_clearance_true,
        final_verdict: runner.verdict.as_ref().map(|v| v.outcome),
        reattach_captured: runner.reattach_captured,
        peak_hold_error: runner.peak_hold_error,
        peak_carrier_accel: runner.peak_carrier_accel,
        max_blackout_vertical_error: runner.max_blackout_vert_err,
        sim_time: runner.world.time(),
        steps: runner.world.step_count(),
        wall_time_s: started.elapsed().as_secs_f64(),
        invariant_violations: runner.world.invariant_violations(),
        events_path: events_path.to_string_lossy().into_owned(),
        out_dir: out_dir.to_string_lossy().into_owned(),
    };
    let report_json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out_dir.join("report.json"), report_json)?;
    Ok(report)
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    world: WorldState,
    mission: MissionState,
    log: EventLog,
    intr: CameraIntrinsics,

    map: AccumulatedMap,
    zone: Option<DeploymentZone>,
    zone_failed: bool,
    head_est: Option<TrackEstimate>,
    fresh_head_centroid: Option<Vec3>,
    ugv_est: Option<Vec3>,
    clearance_est: Option<f64>,

    separation: Vec<f64>,
    ugv_window: VecDeque<(f64, Vec3)>,
    verdict: Option<DeploymentVerdict>,
    next_sample_at: f64,

    tracker: TrajectoryTracker,
    winch_pid: PidState,
    winch_gains: crate::control::PidGains,
    scan: Option<(BSpline, f64, f64)>, // spline, start time, duration
    route: Vec<Vec3>,
    wp_index: usize,
    ground_ops_done: bool,
    at_pickup: bool,
    align_cmd: Vec3,
    align_err_px: Option<f64>,
    reattach_backoff: Option<f64>,
    pending_epm: Option<bool>,
    winch_directive: WinchDirective,
    epm_faults_left: u32,

    next_render_at: f64,
    next_telemetry_at: f64,
    last_goal: Option<Vec3>,

    detach_clearance_est: Option<f64>,
    detach_clearance_true: Option<f64>,
    reattach_captured: bool,
    peak_hold_error: f64,
    peak_carrier_accel: f64,
    prev_uav_velocity: Vec3,
    max_blackout_vert_err: Option<f64>,
    stop_requested: bool,

    traj_uav: String,
    traj_head: String,
    traj_ugv: String,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self, ScenarioError> {
        let world = build_world(cfg)?;
        let intr = CameraIntrinsics {
            width: cfg.camera.width,
            height: cfg.camera.height,
            fx: cfg.camera.fx,
            fy: cfg.camera.fy,
            cx: cfg.camera.cx,
            cy: cfg.camera.cy,
            max_range: cfg.camera.max_range,
        };
        let mut winch_gains = cfg.control.winch_gains;
        winch_gains.i_min = -cfg.winch.max_rate;
        winch_gains.i_max = cfg.winch.max_rate;
        winch_gains.out_min = -1.5 * cfg.winch.max_rate;
        winch_gains.out_max = 1.5 * cfg.winch.max_rate;

        let header = "time,x,y,z,yaw\n".to_string();
        let mut runner = Self {
            cfg,
            world,
            mission: MissionState::new(),
            log: EventLog::new(),
            intr,
            map: AccumulatedMap::new(cfg.perception.voxel_size),
            zone: None,
            zone_failed: false,
            head_est: None,
            fresh_head_centroid: None,
            ugv_est: None,
            clearance_est: None,
            separation: Vec::new(),
            ugv_window: VecDeque::new(),
            verdict: None,
            next_sample_at: 0.0,
            tracker: TrajectoryTracker::new(cfg.control.tracking_gains, cfg.uav.max_speed),
            winch_pid: PidState::default(),
            winch_gains,
            scan: None,
            route: Vec::new(),
            wp_index: 0,
            ground_ops_done: false,
            at_pickup: false,
            align_cmd: Vec3::zeros(),
            align_err_px: None,
            reattach_backoff: None,
            pending_epm: None,
            winch_directive: WinchDirective::Hold,
            epm_faults_left: cfg.faults.epm_release_failures,
            next_render_at: 0.0,
            next_telemetry_at: 0.0,
            last_goal: None,
            detach_clearance_est: None,
            detach_clearance_true: None,
            reattach_captured: false,
            peak_hold_error: 0.0,
            peak_carrier_accel: 0.0,
            prev_uav_velocity: Vec3::zeros(),
            max_blackout_vert_err: None,
            stop_requested: false,
            traj_uav: header.clone(),
            traj_head: header.clone(),
            traj_ugv: header,
        };
        if cfg.start_at_retrieval {
            runner.enter_retrieval()?;
        }
        Ok(runner)
    }

    /// Retrieval-only runs skip deployment: the vehicle already sits on the
    /// ground and the mission opens with the return leg. The ground plane
    /// normally inherited from zone selection is fitted from one frame.
    fn enter_retrieval(&mut self) -> Result<(), ScenarioError> {
        let frame = render_depth(&self.world, &self.intr, None);
        let cloud = depth_to_cloud(&frame, Frame::World);
        let site = Vec3::new(self.cfg.retrieval_site[0], self.cfg.retrieval_site[1], 0.0);
        let near: Vec<Vec3> = cloud
            .points
            .iter()
            .filter(|p| (p.xy() - site.xy()).norm() < 1.5)
            .copied()
            .collect();
        let plane = fit_plane(
            &near,
            FitMethod::Ransac(RansacParams {
                iterations: self.cfg.perception.ransac_iterations as usize,
                inlier_tol: self.cfg.perception.ransac_tolerance,
                seed: self.cfg.seed,
            }),
        )
        .map_err(|e| {
            ScenarioError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("retrieval ground fit failed: {e}"),
            ))
        })?;
        let center = Vec3::new(site.x, site.y, plane_z_at(&plane, site.x, site.y));
        self.zone = Some(DeploymentZone {
            center,
            plane,
            score: 0.0,
            distance_to_entry: 0.0,
            anchor_index: 0,
        });
        self.ugv_est = Some(center + Vec3::new(0.0, 0.0, self.world.ugv.height_m()));
        self.mission = MissionState {
            phase: Phase::ReturnAndSignal,
            entered_at: 0.0,
            attempt_count: 0,
        };
        self.at_pickup = true;
        Ok(())
    }

    fn run(&mut self) -> Result<(RunOutcome, Phase), ScenarioError> {
        loop {
            let now = self.world.time();
            if self.mission.phase.is_terminal() || self.stop_requested {
                let outcome = match self.mission.phase {
                    Phase::Aborted => RunOutcome::Aborted,
                    _ => RunOutcome::Success,
                };
                return Ok((outcome, self.mission.phase));
            }
            if now >= self.cfg.duration_limit {
                self.push_entry(
                    EventLogEntry::new(now, self.mission.phase, "DurationLimit")
                        .with("limit", self.cfg.duration_limit),
                );
                return Ok((RunOutcome::Timeout, self.mission.phase));
            }

            self.maybe_render(now);
            self.update_estimates(now);
            self.maybe_sample_separation(now);

            let transition = {
                let obs = self.observations(now);
                mission_step(&self.mission, &self.cfg.mission, &obs)
            };
            self.apply_transition(transition, now);

            let cmd = self.commands(now);
            let events = self.world.step(&cmd)?;
            let dt = self.world.time() - now;
            let accel = (self.world.uav.velocity - self.prev_uav_velocity).norm() / dt;
            self.peak_carrier_accel = self.peak_carrier_accel.max(accel);
            self.prev_uav_velocity = self.world.uav.velocity;
            self.log_world_events(&events);
            if !self.reattach_captured
                && self.mission.phase == Phase::Reattach
                && events.iter().any(|e| matches!(e, WorldEvent::EpmAttached))
            {
                self.reattach_captured = true;
            }
            self.maybe_telemetry();
        }
    }

    // ------------------------------------------------------------------
    // Perception
    // ------------------------------------------------------------------

    fn render_period(&self) -> Option<f64> {
        let p = &self.cfg.perception;
        match self.mission.phase {
            Phase::Idle | Phase::SelectZone | Phase::Done | Phase::Aborted => None,
            Phase::ScanAndMap => Some(p.scan_render_period),
            Phase::LowerTether
            | Phase::VerifyTouchdown
            | Phase::AlignForRetrieval
            | Phase::Reattach => Some(p.render_period),
            Phase::PositionOverZone | Phase::GroundOps | Phase::ReturnAndSignal => {
                Some(p.render_period.max(0.25))
            }
            Phase::Detach | Phase::Retract => Some(0.5),
        }
    }

    fn blackout_active(&self, now: f64) -> bool {
        match &self.cfg.faults.camera_blackout {
            Some(b) if self.mission.phase == Phase::LowerTether => {
                let dt = now - self.mission.entered_at;
                dt >= b.after && dt < b.after + b.duration
            }
            _ => false,
        }
    }

    fn maybe_render(&mut self, now: f64) {
        self.fresh_head_centroid = None;
        let Some(period) = self.render_period() else {
            return;
        };
        if now + 1e-9 < self.next_render_at {
            return;
        }
        self.next_render_at = now + period;
        if self.blackout_active(now) {
            return;
        }

        let noise;
        let noise_ref = if self.cfg.camera.noise_sigma > 0.0 {
            noise = DepthNoise {
                sigma: self.cfg.camera.noise_sigma,
                seed: self.cfg.seed ^ self.world.step_count().wrapping_mul(0x9e37_79b9),
            };
            Some(&noise)
        } else {
            None
        };
        let image = render_depth(&self.world, &self.intr, noise_ref);
        let cloud = depth_to_cloud(&image, Frame::World);
        let cam = self.world.uav.pose.position;
        let near_clip = self.cfg.perception.near_clip;
        let kept: Vec<Vec3> = cloud
            .points
            .iter()
            .filter(|p| (*p - cam).norm() >= near_clip)
            .copied()
            .collect();
        let kept = PointCloud {
            points: kept,
            frame: Frame::World,
            pixel_index: None,
        };
        self.map.insert_cloud(&kept);
        let Some(zone) = self.zone.clone() else {
            return;
        };

        let p = &self.cfg.perception;
        let above = filter_above_plane(&kept, &zone.plane, p.above_plane_min);
        if above.points.len() < p.dbscan_min_pts {
            return;
        }
        let Ok(result) = dbscan(&above.points, p.dbscan_eps, p.dbscan_min_pts) else {
            return;
        };
        let clusters = &result.clusters;
        if clusters.is_empty() {
            return;
        }

        if matches!(
            self.mission.phase,
            Phase::LowerTether
                | Phase::VerifyTouchdown
                | Phase::Detach
                | Phase::Reattach
                | Phase::Retract
        ) {
            let aoi = Aoi::new(self.anchor(), Vec3::new(0.0, 0.0, -1.0), p.aoi_radius);
            let weights = ClusterWeights {
                center: p.cluster_w_center,
                range: p.cluster_w_range,
            };
            if let Some(i) = select_target_cluster(clusters, &aoi, &weights) {
                self.fresh_head_centroid = Some(clusters[i].centroid);
            }
        }

        if let Some(current) = self.ugv_est {
            if let Some(c) = nearest_cluster(clusters, &current, UGV_TRACK_GATE) {
                self.ugv_est = Some(c.centroid);
            }
        }

        if matches!(
            self.mission.phase,
            Phase::ReturnAndSignal | Phase::AlignForRetrieval | Phase::Reattach
        ) {
            self.update_alignment(&zone, clusters);
        }
    }

    /// Measures the vehicle's pixel offset from the point where the winch
    /// line meets the ground, and turns it into a lateral servo command.
    fn update_alignment(&mut self, zone: &DeploymentZone, clusters: &[Cluster]) {
        let Some(ugv) = self.ugv_est else {
            return;
        };
        let Some(cluster) = nearest_cluster(clusters, &ugv, UGV_TRACK_GATE) else {
            return;
        };
        let cam = self.world.uav.pose.position;
        let yaw = self.world.uav.pose.yaw;
        let anchor = self.anchor();
        let ground_z = plane_z_at(&zone.plane, anchor.x, anchor.y);
        let reference = Vec3::new(anchor.x, anchor.y, ground_z);
        let (Some((u, v)), Some((ur, vr))) = (
            project_point(&cluster.centroid, &cam, yaw, &self.intr),
            project_point(&reference, &cam, yaw, &self.intr),
        ) else {
            return;
        };
        let err = ((u - ur).powi(2) + (v - vr).powi(2)).sqrt();
        self.align_err_px = Some(err);
        // Re-centre the measurement on the reference pixel so the servo's
        // principal-point convention applies unchanged.
        let shifted = (u - ur + self.intr.cx, v - vr + self.intr.cy);
        let altitude = cam.z - ground_z;
        self.align_cmd = servo_alignment(
            shifted,
            &self.intr,
            altitude,
            yaw,
            self.cfg.control.servo_gain,
        )
        .linear;
    }

    fn update_estimates(&mut self, now: f64) {
        let anchor = self.anchor();
        let enc_len = length_from_encoder(&read_encoder(&self.world.winch));
        let centroid = self.fresh_head_centroid;
        let est = fuse_head_estimate(
            centroid.as_ref(),
            enc_len,
            &anchor,
            self.head_est.as_ref(),
            now,
            self.cfg.perception.fuse_alpha,
        );
        if self.blackout_active(now) {
            let vert = (est.position.z - self.world.head.position.z).abs();
            let worst = self.max_blackout_vert_err.get_or_insert(0.0);
            *worst = worst.max(vert);
        }
        self.head_est = Some(est);

        self.clearance_est = match (&self.zone, &self.head_est) {
            (Some(zone), Some(est)) if self.world.head.attached => {
                let bottom = Vec3::new(
                    est.position.x,
                    est.position.y,
                    est.position.z - self.world.ugv.height_m(),
                );
                Some(zone.plane.signed_distance(&bottom))
            }
            _ => None,
        };

        if self.mission.phase == Phase::SelectZone && self.zone.is_none() && !self.zone_failed {
            self.select_zone(now);
        }
    }

    fn select_zone(&mut self, now: f64) {
        let p = &self.cfg.perception;
        let reps = self.map.representatives_cloud();
        let entry = Vec3::new(self.cfg.entry_point[0], self.cfg.entry_point[1], 0.0);
        let entry3 = reps
            .points
            .iter()
            .min_by(|a, b| {
                let da = (a.xy() - entry.xy()).norm();
                let db = (b.xy() - entry.xy()).norm();
                da.total_cmp(&db)
            })
            .map(|p| Vec3::new(entry.x, entry.y, p.z));
        let Some(entry3) = entry3 else {
            self.zone_failed = true;
            return;
        };
        let normals = estimate_normals(&reps, p.normal_k, p.normal_radius);
        let mask = segment_navigable(&normals, p.slope_threshold_deg.to_radians());
        let params = ZoneParams {
            min_patch_radius: p.zone_min_patch_radius,
            w_dist: p.zone_w_dist,
            w_flatness: p.zone_w_flatness,
            min_navigable_fraction: p.zone_min_navigable_fraction,
        };
        match find_deployment_zone(&reps, &mask, &entry3, &params) {
            Ok(zone) => {
                self.push_entry(
                    EventLogEntry::new(now, self.mission.phase, "ZoneSelected")
                        .with("center", vec![zone.center.x, zone.center.y, zone.center.z])
                        .with("score", zone.score),
                );
                self.zone = Some(zone);
            }
            Err(e) => {
                self.push_entry(
                    EventLogEntry::new(now, self.mission.phase, "ZoneSearchFailed")
                        .with("reason", e.to_string()),
                );
                self.zone_failed = true;
            }
        }
    }

    fn maybe_sample_separation(&mut self, now: f64) {
        if self.mission.phase != Phase::VerifyTouchdown {
            return;
        }
        if now + 1e-9 < self.next_sample_at {
            return;
        }
        self.next_sample_at = now + self.cfg.mission.verify_sample_period;
        let (Some(head), Some(ugv)) = (&self.head_est, &self.ugv_est) else {
            return;
        };
        self.separation.push((head.position - ugv).norm());
        self.ugv_window.push_back((now, *ugv));
        while self.ugv_window.len() > self.cfg.mission.verify_window {
            self.ugv_window.pop_front();
        }
        // Stationarity is judged on net horizontal drift across the window:
        // per-sample centroid jitter (cluster membership shifts as the head
        // rises) and vertical wobble from cluster splits must not read as the
        // vehicle driving away, while sustained motion still accumulates.
        let stationary = match (self.ugv_window.front(), self.ugv_window.back()) {
            (Some((t0, p0)), Some((t1, p1))) if t1 > t0 => {
                (p1.xy() - p0.xy()).norm() / (t1 - t0) < self.cfg.mission.stationary_speed
            }
            _ => true,
        };
        let outcome = verify_detachment(
            &self.separation,
            stationary,
            self.cfg.mission.min_separation,
            self.cfg.mission.verify_window,
        );
        self.verdict = Some(DeploymentVerdict {
            outcome,
            evidence: VerdictEvidence {
                clearance: self.detach_clearance_est.unwrap_or(f64::NAN),
                separation_series: self.separation.clone(),
                ugv_stationary: stationary,
            },
        });
    }

    // ------------------------------------------------------------------
    // Mission interface
    // ------------------------------------------------------------------

    fn observations(&self, now: f64) -> Observations<'_> {
        Observations {
            now,
            clearance: self.clearance_est,
            scan_complete: self.scan_complete(now),
            zone: self.zone.as_ref(),
            zone_search_failed: self.zone_failed,
            position_error: self.position_error(),
            detach_verdict: if self.mission.phase == Phase::VerifyTouchdown {
                self.verdict.as_ref()
            } else {
                None
            },
            detach_requested: false,
            head_stowed: self.world.head_stowed(),
            head_attached: self.world.head.attached,
            ground_ops_complete: self.ground_ops_done,
            ugv_at_pickup: self.at_pickup,
            alignment_error_px: self.align_err_px,
        }
    }

    fn apply_transition(&mut self, transition: MissionTransition, now: f64) {
        let phase_before = self.mission.phase;
        for event in &transition.events {
            self.log_mission_event(event, now, phase_before);
            if let MissionEvent::DetachCommanded { clearance } = event {
                self.detach_clearance_est = Some(*clearance);
                self.detach_clearance_true = self.true_clearance();
            }
        }

        match transition.commands.epm {
            Some(false) if self.epm_faults_left > 0 => {
                self.epm_faults_left -= 1;
                self.push_entry(
                    EventLogEntry::new(now, phase_before, "FaultInjected")
                        .with("fault", "epm_release_dropped"),
                );
                self.pending_epm = None;
            }
            other => self.pending_epm = other,
        }
        match transition.commands.pause_map {
            Some(true) => self.map.pause(),
            Some(false) => self.map.resume(),
            None => {}
        }
        self.winch_directive = transition.commands.winch;

        let entered = transition.next.phase != phase_before;
        self.mission = transition.next;
        if entered {
            self.on_phase_entry(self.mission.phase, now);
            if self
                .cfg
                .stop_after
                .as_deref()
                .is_some_and(|s| s == self.mission.phase.name())
            {
                self.stop_requested = true;
            }
        }
    }

    fn on_phase_entry(&mut self, phase: Phase, now: f64) {
        match phase {
            Phase::ScanAndMap => {
                let start = self.world.uav.pose.position;
                let e = self.cfg.entry_point;
                let r = self.cfg.perception.scan_radius;
                let z = self.cfg.mission.scan_altitude;
                let wps = [
                    start,
                    Vec3::new(e[0] - r, e[1] - r, z),
                    Vec3::new(e[0] + r, e[1] - r, z),
                    Vec3::new(e[0] + r, e[1] + r, z),
                    Vec3::new(e[0] - r, e[1] + r, z),
                    Vec3::new(e[0], e[1], z),
                ];
                let length: f64 = wps.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
                let duration = length / self.cfg.control.transit_speed + 2.0;
                match BSpline::from_waypoints(&wps, self.cfg.control.spline_degree, duration) {
                    Ok(spline) => self.scan = Some((spline, now, duration)),
                    Err(e) => {
                        log::warn!("scan spline failed ({e}); holding position instead");
                        self.scan = None;
                    }
                }
                self.tracker.reset();
            }
            Phase::VerifyTouchdown => {
                let frozen = self
                    .head_est
                    .as_ref()
                    .map(|e| e.position)
                    .unwrap_or_else(|| self.anchor());
                self.ugv_est = Some(frozen);
                self.separation.clear();
                self.ugv_window.clear();
                self.verdict = None;
                self.next_sample_at = now;
            }
            Phase::GroundOps => {
                if let Some(zone) = &self.zone {
                    self.route = ground_ops_route(&self.cfg.mission, &zone.center);
                }
                self.wp_index = 0;
                self.ground_ops_done = self.route.is_empty();
                if !self.world.ugv.pose.upright {
                    match self.world.ugv_self_right() {
                        Ok(events) => self.log_world_events(&events),
                        Err(e) => self.push_entry(
                            EventLogEntry::new(now, phase, "SelfRightBlocked")
                                .with("reason", e.to_string()),
                        ),
                    }
                }
            }
            Phase::Reattach => {
                self.reattach_backoff = None;
            }
            _ => {}
        }
    }

    // ------------------------------------------------------------------
    // Actuation
    // ------------------------------------------------------------------

    fn commands(&mut self, now: f64) -> Commands {
        let dt = self.world.dt;
        let uav_velocity = self.uav_velocity(now, dt);
        let winch_rate = self.winch_rate(dt);
        let track_speeds = self.track_speeds();
        Commands {
            uav_velocity,
            winch_rate,
            track_speeds,
            arm_rates: [0.0, 0.0],
            epm: self.pending_epm.take(),
        }
    }

    fn uav_velocity(&mut self, now: f64, dt: f64) -> Vec3 {
        let position = self.world.uav.pose.position;
        let goal;
        let cmd = match self.mission.phase {
            Phase::ScanAndMap => match &self.scan {
                Some((spline, t0, _)) => {
                    let t = now - t0;
                    goal = Some(spline.position(t));
                    self.tracker.track(&position, spline, t, dt).linear
                }
                None => {
                    goal = None;
                    Vec3::zeros()
                }
            },
            Phase::SelectZone => {
                goal = Some(Vec3::new(
                    self.cfg.entry_point[0],
                    self.cfg.entry_point[1],
                    self.cfg.mission.scan_altitude,
                ));
                self.tracker.track_point(&position, &goal.unwrap(), dt).linear
            }
            Phase::PositionOverZone
            | Phase::LowerTether
            | Phase::VerifyTouchdown
            | Phase::Detach
            | Phase::GroundOps
            | Phase::ReturnAndSignal => match self.deploy_goal() {
                Some(g) => {
                    goal = Some(g);
                    self.tracker.track_point(&position, &g, dt).linear
                }
                None => {
                    goal = None;
                    Vec3::zeros()
                }
            },
            Phase::AlignForRetrieval | Phase::Reattach => {
                let hold_z = self
                    .deploy_goal()
                    .map(|g| g.z)
                    .unwrap_or(position.z);
                let vz = (1.2 * (hold_z - position.z)).clamp(-0.5, 0.5);
                goal = None;
                clamp_norm(
                    Vec3::new(self.align_cmd.x, self.align_cmd.y, vz),
                    self.world.uav.max_speed,
                )
            }
            Phase::Idle | Phase::Retract | Phase::Done | Phase::Aborted => {
                goal = None;
                Vec3::zeros()
            }
        };
        self.last_goal = goal;
        if let Some(g) = goal {
            if matches!(
                self.mission.phase,
                Phase::LowerTether | Phase::VerifyTouchdown | Phase::Detach
            ) {
                self.peak_hold_error = self.peak_hold_error.max((position - g).norm());
            }
        }
        cmd
    }

    /// Where the carrier should hover so the winch line hangs over the zone.
    fn deploy_goal(&self) -> Option<Vec3> {
        let zone = self.zone.as_ref()?;
        let off = self.cfg.winch.anchor_offset;
        Some(Vec3::new(
            zone.center.x - off[0],
            zone.center.y - off[1],
            zone.center.z + self.cfg.mission.deploy_altitude,
        ))
    }

    fn winch_rate(&mut self, dt: f64) -> f64 {
        let target = match self.winch_directive {
            WinchDirective::Hold => 0.0,
            WinchDirective::PayOut(r) => r,
            WinchDirective::Retract(r) => -r,
            WinchDirective::MaintainSlack => {
                let anchor = self.anchor();
                let attach = self.world.ugv.attach_point();
                let want = 1.2 * (anchor - attach).norm();
                (2.0 * (want - self.world.winch.deployed_length))
                    .clamp(-self.cfg.winch.max_rate, self.cfg.winch.max_rate)
            }
        };
        let target = self.reattach_override(target);
        winch_rate_command(
            &mut self.winch_pid,
            &self.winch_gains,
            target,
            self.world.winch.rate,
            dt,
        )
    }

    /// A missed capture leaves slack piling up on the ground. Pull back a
    /// little and descend again; the servo keeps improving the alignment
    /// between tries.
    fn reattach_override(&mut self, target: f64) -> f64 {
        if self.mission.phase != Phase::Reattach || self.world.head.attached {
            self.reattach_backoff = None;
            return target;
        }
        let len = self.world.winch.deployed_length;
        if let Some(until) = self.reattach_backoff {
            if len > until {
                return -self.cfg.mission.descent_rate;
            }
            self.reattach_backoff = None;
            return target;
        }
        if let Some(zone) = &self.zone {
            let anchor = self.anchor();
            let attach_z = plane_z_at(&zone.plane, anchor.x, anchor.y) + self.world.ugv.height_m();
            let line = anchor.z - attach_z;
            if len > line + REATTACH_SLACK_LIMIT {
                self.reattach_backoff = Some((len - REATTACH_BACKOFF).max(0.1));
                return -self.cfg.mission.descent_rate;
            }
        }
        target
    }

    fn track_speeds(&mut self) -> [f64; 2] {
        if !self.world.ugv.grounded || !self.world.ugv.pose.upright {
            return [0.0, 0.0];
        }
        match self.mission.phase {
            Phase::GroundOps => {
                if self.ground_ops_done {
                    return [0.0, 0.0];
                }
                let Some(goal) = self.route.get(self.wp_index).copied() else {
                    self.ground_ops_done = true;
                    return [0.0, 0.0];
                };
                let pos = self.world.ugv.pose.position;
                if (goal.xy() - pos.xy()).norm() < WAYPOINT_TOLERANCE {
                    self.wp_index += 1;
                    if self.wp_index >= self.route.len() {
                        self.ground_ops_done = true;
                    }
                    return [0.0, 0.0];
                }
                drive_toward(&self.world.ugv, &goal, self.cfg.ugv.max_track_speed)
            }
            Phase::ReturnAndSignal => {
                let Some(zone) = &self.zone else {
                    return [0.0, 0.0];
                };
                let pos = self.world.ugv.pose.position;
                if (zone.center.xy() - pos.xy()).norm() < PICKUP_TOLERANCE {
                    self.at_pickup = true;
                    return [0.0, 0.0];
                }
                drive_toward(&self.world.ugv, &zone.center, self.cfg.ugv.max_track_speed)
            }
            _ => [0.0, 0.0],
        }
    }

    // ------------------------------------------------------------------
    // Bookkeeping
    // ------------------------------------------------------------------

    fn anchor(&self) -> Vec3 {
        self.world.winch.anchor_world(&self.world.uav)
    }

    fn true_clearance(&self) -> Option<f64> {
        let p = self.world.ugv.pose.position;
        self.world
            .terrain
            .height_at(p.x, p.y)
            .ok()
            .map(|ground| p.z - ground)
    }

    fn scan_complete(&self, now: f64) -> bool {
        match &self.scan {
            Some((spline, t0, duration)) => {
                let settled = now - t0 >= *duration;
                let near_end = (self.world.uav.pose.position - spline.position(*duration)).norm()
                    < 0.2;
                settled && near_end
            }
            None => self.mission.phase == Phase::ScanAndMap,
        }
    }

    fn position_error(&self) -> Option<f64> {
        if self.mission.phase != Phase::PositionOverZone {
            return None;
        }
        let goal = self.deploy_goal()?;
        Some((self.world.uav.pose.position - goal).norm())
    }

    fn log_mission_event(&mut self, event: &MissionEvent, now: f64, phase: Phase) {
        let value = serde_json::to_value(event).expect("mission events serialize");
        let Value::Object(mut obj) = value else {
            unreachable!("tagged enum serializes to an object");
        };
        let kind = obj
            .remove("kind")
            .and_then(|k| k.as_str().map(str::to_string))
            .unwrap_or_else(|| "Unknown".into());
        let mut entry = EventLogEntry::new(now, phase, kind);
        entry.payload = obj;
        self.push_entry(entry);
    }

    fn log_world_events(&mut self, events: &[WorldEvent]) {
        let now = self.world.time();
        let phase = self.mission.phase;
        for event in events {
            let entry = match event {
                WorldEvent::EpmAttached => EventLogEntry::new(now, phase, "EpmAttached"),
                WorldEvent::EpmDetached => EventLogEntry::new(now, phase, "EpmDetached"),
                WorldEvent::Touchdown { flipped, swing_mag } => {
                    EventLogEntry::new(now, phase, "Touchdown")
                        .with("flipped", *flipped)
                        .with("swing_mag", *swing_mag)
                }
                WorldEvent::Liftoff => EventLogEntry::new(now, phase, "Liftoff"),
                WorldEvent::TetherTaut { deficit } => {
                    EventLogEntry::new(now, phase, "TetherTaut").with("deficit", *deficit)
                }
                WorldEvent::WinchWhileHeadFree => {
                    EventLogEntry::new(now, phase, "WinchWhileHeadFree")
                }
                WorldEvent::SelfRightStarted => EventLogEntry::new(now, phase, "SelfRightStarted"),
                WorldEvent::SelfRightCompleted => {
                    EventLogEntry::new(now, phase, "SelfRightCompleted")
                }
            };
            self.push_entry(entry);
        }
    }

    fn push_entry(&mut self, entry: EventLogEntry) {
        self.log.push(entry).expect("log times are monotone");
    }

    fn maybe_telemetry(&mut self) {
        let now = self.world.time();
        if now + 1e-9 < self.next_telemetry_at {
            return;
        }
        while self.next_telemetry_at <= now + 1e-9 {
            self.next_telemetry_at += self.cfg.perception.telemetry_period;
        }

        let mut payload = Map::new();
        let mut put = |key: &str, value: Value| {
            payload.insert(key.to_string(), value);
        };
        put("tether_length", self.world.winch.deployed_length.into());
        put(
            "encoder_length",
            length_from_encoder(&read_encoder(&self.world.winch)).into(),
        );
        put("voxels", (self.map.len() as u64).into());
        if let Some(c) = self.clearance_est {
            put("clearance", c.into());
        }
        if let Some(c) = self.true_clearance() {
            put("clearance_true", c.into());
        }
        if self.mission.phase == Phase::VerifyTouchdown {
            if let Some(s) = self.separation.last() {
                put("separation", (*s).into());
            }
        }
        if let Some(goal) = self.last_goal {
            put(
                "tracking_error",
                (self.world.uav.pose.position - goal).norm().into(),
            );
        }
        if let Some(est) = &self.head_est {
            let err = (est.position - self.world.head.position).norm();
            put("head_error", err.into());
            put(
                "head_vertical_error",
                (est.position.z - self.world.head.position.z).abs().into(),
            );
        }
        if let Some(px) = self.align_err_px {
            put("alignment_error_px", px.into());
        }
        put("blackout", self.blackout_active(now).into());
        put("attempt", self.mission.attempt_count.into());
        put("ugv_speed", self.world.ugv.speed().into());

        let mut entry = EventLogEntry::new(now, self.mission.phase, "Telemetry");
        entry.payload = payload;
        self.push_entry(entry);

        for (rows, pose) in [
            (&mut self.traj_uav, &self.world.uav.pose),
            (
                &mut self.traj_head,
                &Pose::new(self.world.head.position, 0.0),
            ),
            (&mut self.traj_ugv, &self.world.ugv.pose),
        ] {
            rows.push_str(&format!(
                "{:.3},{:.6},{:.6},{:.6},{:.6}\n",
                now, pose.position.x, pose.position.y, pose.position.z, pose.yaw
            ));
        }
    }
}

// ----------------------------------------------------------------------
// World construction
// ----------------------------------------------------------------------

fn build_terrain(cfg: &ScenarioConfig) -> Result<Terrain, ScenarioError> {
    let mut terrain = match &cfg.terrain {
        TerrainConfig::Flat {
            extent,
            cell_size,
            elevation,
        } => Terrain::flat(*extent, *cell_size, *elevation)?,
        TerrainConfig::Ramp {
            extent,
            cell_size,
            slope_deg,
        } => Terrain::ramp(*extent, *cell_size, slope_deg.to_radians().tan())?,
        TerrainConfig::Procedural {
            extent,
            cell_size,
            amplitude,
            feature_size,
            seed,
        } => Terrain::procedural(*extent, *cell_size, *amplitude, *feature_size, *seed)?,
    };
    for b in &cfg.boxes {
        terrain.raise_box(b.min[0], b.min[1], b.max[0], b.max[1], b.height);
    }
    Ok(terrain)
}

fn build_world(cfg: &ScenarioConfig) -> Result<WorldState, ScenarioError> {
    let terrain = build_terrain(cfg)?;
    let start = Vec3::new(cfg.uav.start[0], cfg.uav.start[1], cfg.uav.start[2]);
    let uav = UavState {
        pose: Pose::new(start, cfg.uav.yaw),
        velocity: Vec3::zeros(),
        max_speed: cfg.uav.max_speed,
        payload_capacity: cfg.uav.payload_capacity,
    };
    let winch = WinchState {
        deployed_length: cfg.winch.initial_length,
        max_length: cfg.winch.max_length,
        rate: 0.0,
        drum_radius: cfg.winch.drum_radius,
        encoder_cpr: cfg.winch.encoder_cpr,
        anchor_offset: Vec3::new(
            cfg.winch.anchor_offset[0],
            cfg.winch.anchor_offset[1],
            cfg.winch.anchor_offset[2],
        ),
        tau: cfg.winch.tau,
        max_rate: cfg.winch.max_rate,
    };
    let anchor = winch.anchor_world(&uav);
    let head_hang = anchor - Vec3::new(0.0, 0.0, cfg.winch.initial_length);

    let mut ugv = UgvState {
        pose: Pose::new(Vec3::zeros(), 0.0),
        track_speeds: [0.0, 0.0],
        arm_angles: [0.0, 0.0],
        mass: cfg.ugv.mass,
        carrying_payload: cfg.ugv.carrying_payload,
        payload_mass: cfg.ugv.payload_mass,
        footprint_mm: cfg.ugv.footprint_mm,
        extended_length_mm: cfg.ugv.extended_length_mm,
        grounded: false,
        vertical_velocity: 0.0,
    };
    let head;
    if cfg.start_at_retrieval {
        let site = cfg.retrieval_site;
        let ground = terrain.height_at(site[0], site[1])?;
        ugv.pose = Pose::new(Vec3::new(site[0], site[1], ground), 0.0);
        ugv.grounded = true;
        head = TetherHeadState {
            position: head_hang,
            swing: [0.0, 0.0],
            swing_rate: [0.0, 0.0],
            epm_on: false,
            attached: false,
            capture_radius: cfg.head.capture_radius,
            radius: cfg.head.radius,
        };
    } else {
        ugv.pose = Pose::new(head_hang - Vec3::new(0.0, 0.0, ugv.height_m()), 0.0);
        head = TetherHeadState {
            position: head_hang,
            swing: [0.0, 0.0],
            swing_rate: [0.0, 0.0],
            epm_on: true,
            attached: true,
            capture_radius: cfg.head.capture_radius,
            radius: cfg.head.radius,
        };
    }

    let params = WorldParams {
        swing_noise_sigma: cfg.faults.swing_noise_sigma,
        max_track_speed: cfg.ugv.max_track_speed,
        ..WorldParams::default()
    };
    Ok(WorldState::new(
        terrain, uav, winch, head, ugv, params, cfg.dt, cfg.seed,
    ))
}

// ----------------------------------------------------------------------
// Small helpers
// ----------------------------------------------------------------------

fn plane_z_at(plane: &Plane, x: f64, y: f64) -> f64 {
    (plane.offset - plane.normal.x * x - plane.normal.y * y) / plane.normal.z
}

fn nearest_cluster<'c>(clusters: &'c [Cluster], to: &Vec3, gate: f64) -> Option<&'c Cluster> {
    clusters
        .iter()
        .map(|c| ((c.centroid - to).norm(), c))
        .filter(|(d, _)| *d <= gate)
        .min_by(|(a, _), (b, _)| a.total_cmp(b))
        .map(|(_, c)| c)
}

/// Differential-drive point chase: turn in place when badly misaligned,
/// otherwise arc toward the goal with speed scaled by remaining distance.
fn drive_toward(ugv: &UgvState, goal: &Vec3, limit: f64) -> [f64; 2] {
    let pos = ugv.pose.position;
    let dx = goal.x - pos.x;
    let dy = goal.y - pos.y;
    let dist = (dx * dx + dy * dy).sqrt();
    let heading_err = wrap_angle(dy.atan2(dx) - ugv.pose.yaw);
    if heading_err.abs() > 1.2 {
        let s = 0.45 * limit * heading_err.signum();
        return [-s, s];
    }
    let v = (0.6 * dist + 0.02).min(0.8 * limit);
    let k = (0.5 * ugv.width_m() * heading_err).clamp(-0.4 * limit, 0.4 * limit);
    let v = v.min(limit - k.abs());
    [v - k, v + k]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.name = "smoke".into();
        c.seed = 11;
        c.duration_limit = 120.0;
        c.terrain = TerrainConfig::Flat {
            extent: 8.0,
            cell_size: 0.1,
            elevation: 0.0,
        };
        c.entry_point = [0.6, 0.0];
        c.camera.width = 80;
        c.camera.height = 60;
        c.camera.fx = 60.0;
        c.camera.fy = 60.0;
        c.camera.cx = 39.5;
        c.camera.cy = 29.5;
        c
    }

    #[test]
    fn default_world_hangs_the_vehicle_under_the_carrier() {
        let cfg = ScenarioConfig::default();
        let world = build_world(&cfg).expect("world builds");
        let anchor = world.winch.anchor_world(&world.uav);
        assert!(world.head.attached);
        assert!((world.head.position - anchor).norm() <= cfg.winch.initial_length + 1e-9);
        assert!(world.ugv.pose.position.z < world.head.position.z);
        assert!(!world.ugv.grounded);
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let mut cfg = quick_config();
        cfg.dt = -0.5;
        let dir = tempfile::tempdir().expect("tempdir");
        match run_scenario(&cfg, dir.path()) {
            Err(ScenarioError::InvalidConfig(v)) => assert!(!v.is_empty()),
            other => panic!("expected config rejection, got {other:?}"),
        }
    }

    #[test]
    fn truncated_run_reaches_the_lowering_phase() {
        let mut cfg = quick_config();
        cfg.stop_after = Some("LowerTether".into());
        let dir = tempfile::tempdir().expect("tempdir");
        let report = run_scenario(&cfg, dir.path()).expect("run succeeds");
        assert_eq!(report.outcome, RunOutcome::Success);
        assert_eq!(report.final_phase, "LowerTether");
        assert!(report.zone_center.is_some());
        assert!(dir.path().join("events.jsonl").is_file());
        assert!(dir.path().join("uav.csv").is_file());
        assert!(dir.path().join("report.json").is_file());
        assert!(report.invariant_violations.is_empty());
    }

    #[test]
    fn identical_configs_write_identical_event_logs() {
        let mut cfg = quick_config();
        cfg.stop_after = Some("LowerTether".into());
        let d1 = tempfile::tempdir().expect("tempdir");
        let d2 = tempfile::tempdir().expect("tempdir");
        run_scenario(&cfg, d1.path()).expect("first run");
        run_scenario(&cfg, d2.path()).expect("second run");
        let a = std::fs::read(d1.path().join("events.jsonl")).expect("first log");
        let b = std::fs::read(d2.path().join("events.jsonl")).expect("second log");
        assert_eq!(a, b);
    }

    #[test]
    fn full_deployment_reaches_ground_ops() {
        let mut cfg = quick_config();
        cfg.stop_after = Some("GroundOps".into());
        let dir = tempfile::tempdir().expect("tempdir");
        let report = run_scenario(&cfg, dir.path()).expect("run succeeds");
        assert_eq!(report.outcome, RunOutcome::Success, "report: {report:?}");
        assert_eq!(report.final_phase, "GroundOps");
        assert_eq!(report.attempt_count, 1);
        let est = report.detach_clearance_estimated.expect("clearance logged");
        assert!(est <= cfg.mission.d_min + 1e-9, "clearance {est}");
        assert_eq!(report.final_verdict, Some(VerdictOutcome::Success));
    }
}
