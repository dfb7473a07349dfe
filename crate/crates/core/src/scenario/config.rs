//! Scenario description and validation.
//!
//! Every field has a default, so a config file only needs to name what it
//! changes. `validate_config` collects every violation instead of stopping
//! at the first, which keeps config debugging to a single round trip.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::PidGains;
use crate::control::{default_tracking_gains, default_winch_gains};
use crate::mission::MissionConfig;

/// Transport envelope limit for the folded vehicle, mm per dimension.
pub const TRANSPORT_ENVELOPE_MM: f64 = 350.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    /// Simulation step, s.
    pub dt: f64,
    /// Give up and report a timeout after this much simulated time, s.
    pub duration_limit: f64,
    pub terrain: TerrainConfig,
    /// Rectangular elevation patches stamped onto the base terrain,
    /// e.g. a structure next to the entry of a hidden space.
    pub boxes: Vec<RaisedBox>,
    /// Where ground operations should happen, world xy, m.
    pub entry_point: [f64; 2],
    pub uav: UavConfig,
    pub winch: WinchConfig,
    pub head: HeadConfig,
    pub ugv: UgvConfig,
    pub camera: CameraConfig,
    pub perception: PerceptionConfig,
    pub control: ControlConfig,
    pub mission: MissionConfig,
    pub faults: FaultConfig,
    /// Fold the flipper arms for transport, shrinking the stowed envelope.
    pub stow_arms_for_transport: bool,
    /// Skip deployment: the vehicle starts detached on the ground at
    /// `retrieval_site` and the mission begins with the return leg.
    pub start_at_retrieval: bool,
    /// Ground vehicle start position for retrieval-only runs, world xy, m.
    pub retrieval_site: [f64; 2],
    /// End the run successfully as soon as this phase is entered.
    pub stop_after: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            dt: 0.01,
            duration_limit: 180.0,
            terrain: TerrainConfig::default(),
            boxes: Vec::new(),
            entry_point: [0.0, 0.0],
            uav: UavConfig::default(),
            winch: WinchConfig::default(),
            head: HeadConfig::default(),
            ugv: UgvConfig::default(),
            camera: CameraConfig::default(),
            perception: PerceptionConfig::default(),
            control: ControlConfig::default(),
            mission: MissionConfig::default(),
            faults: FaultConfig::default(),
            stow_arms_for_transport: true,
            start_at_retrieval: false,
            retrieval_site: [0.0, 0.0],
            stop_after: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn from_path(path: &Path) -> Result<Self, super::ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_json_str(&text)?)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_config(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainConfig {
    Flat {
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_cell_size")]
        cell_size: f64,
        #[serde(default)]
        elevation: f64,
    },
    Ramp {
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_cell_size")]
        cell_size: f64,
        /// Grade along +x, degrees.
        #[serde(default = "default_slope_deg")]
        slope_deg: f64,
    },
    Procedural {
        #[serde(default = "default_extent")]
        extent: f64,
        #[serde(default = "default_cell_size")]
        cell_size: f64,
        /// Peak-to-floor height variation, m.
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Horizontal scale of the bumps, m.
        #[serde(default = "default_feature_size")]
        feature_size: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_extent() -> f64 {
    10.0
}

fn default_cell_size() -> f64 {
    0.1
}

fn default_slope_deg() -> f64 {
    10.0
}

fn default_amplitude() -> f64 {
    0.3
}

fn default_feature_size() -> f64 {
    1.5
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig::Flat {
            extent: 10.0,
            cell_size: 0.1,
            elevation: 0.0,
        }
    }
}

impl TerrainConfig {
    pub fn extent(&self) -> f64 {
        match self {
            TerrainConfig::Flat { extent, .. }
            | TerrainConfig::Ramp { extent, .. }
            | TerrainConfig::Procedural { extent, .. } => *extent,
        }
    }

    pub fn cell_size(&self) -> f64 {
        match self {
            TerrainConfig::Flat { cell_size, .. }
            | TerrainConfig::Ramp { cell_size, .. }
            | TerrainConfig::Procedural { cell_size, .. } => *cell_size,
        }
    }
}

/// Axis-aligned raised rectangle stamped onto the terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaisedBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UavConfig {
    /// Start position, world frame, m.
    pub start: [f64; 3],
    pub yaw: f64,
    pub max_speed: f64,
    /// Total mass the carrier may lift, kg.
    pub payload_capacity: f64,
    /// Mass of the winch module itself, kg.
    pub module_mass: f64,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0, 4.0],
            yaw: 0.0,
            max_speed: 2.0,
            payload_capacity: 6.0,
            module_mass: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WinchConfig {
    pub max_length: f64,
    pub drum_radius: f64,
    pub encoder_cpr: u32,
    /// Drum speed-loop time constant, s.
    pub tau: f64,
    pub max_rate: f64,
    /// Anchor position in the carrier body frame, m. Offset laterally so the
    /// hanging vehicle stays out of the nadir camera's view.
    pub anchor_offset: [f64; 3],
    pub initial_length: f64,
}

impl Default for WinchConfig {
    fn default() -> Self {
        Self {
            max_length: 8.0,
            drum_radius: 0.02,
            encoder_cpr: 4096,
            tau: 0.2,
            max_rate: 0.6,
            anchor_offset: [0.35, 0.0, -0.05],
            initial_length: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub capture_radius: f64,
    pub radius: f64,
    pub mass: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            capture_radius: 0.03,
            radius: 0.025,
            mass: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UgvConfig {
    pub mass: f64,
    /// Folded envelope (length, width, height), mm.
    pub footprint_mm: [f64; 3],
    /// Length with the flipper arms extended, mm.
    pub extended_length_mm: f64,
    pub payload_mass: f64,
    pub carrying_payload: bool,
    pub max_track_speed: f64,
}

impl Default for UgvConfig {
    fn default() -> Self {
        Self {
            mass: 3.68,
            footprint_mm: [330.0, 330.0, 100.0],
            extended_length_mm: 490.0,
            payload_mass: 0.0,
            carrying_payload: false,
            max_track_speed: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub max_range: f64,
    pub noise_sigma: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            fx: 120.0,
            fy: 120.0,
            cx: 79.5,
            cy: 59.5,
            max_range: 10.0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    /// Cluster reachability distance, m.
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub normal_k: usize,
    pub normal_radius: f64,
    pub slope_threshold_deg: f64,
    /// Weight of the vision vertical against the encoder vertical.
    pub fuse_alpha: f64,
    pub voxel_size: f64,
    /// Cylinder radius around the winch vertical inside which the head
    /// cluster is searched, m.
    pub aoi_radius: f64,
    pub cluster_w_center: f64,
    pub cluster_w_range: f64,
    pub zone_min_patch_radius: f64,
    pub zone_w_dist: f64,
    pub zone_w_flatness: f64,
    pub zone_min_navigable_fraction: f64,
    /// Points closer to the ground plane than this are dropped before
    /// clustering, m.
    pub above_plane_min: f64,
    /// Points closer to the camera than this never enter the map, m.
    pub near_clip: f64,
    /// Ground plane consensus settings for the retrieval-only start.
    pub ransac_iterations: u32,
    pub ransac_tolerance: f64,
    /// Scan lawnmower half-extent around the entry point, m.
    pub scan_radius: f64,
    /// Seconds between camera frames while scanning.
    pub scan_render_period: f64,
    /// Seconds between camera frames while tracking the descent.
    pub render_period: f64,
    /// Seconds between telemetry records.
    pub telemetry_period: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            dbscan_eps: 0.05,
            dbscan_min_pts: 5,
            normal_k: 12,
            normal_radius: 0.15,
            slope_threshold_deg: 30.0,
            fuse_alpha: 0.7,
            voxel_size: 0.05,
            aoi_radius: 0.8,
            cluster_w_center: 1.0,
            cluster_w_range: 0.1,
            zone_min_patch_radius: 0.2,
            zone_w_dist: 1.0,
            zone_w_flatness: 50.0,
            zone_min_navigable_fraction: 0.9,
            above_plane_min: 0.04,
            near_clip: 0.5,
            ransac_iterations: 200,
            ransac_tolerance: 0.02,
            scan_radius: 1.0,
            scan_render_period: 0.2,
            render_period: 0.1,
            telemetry_period: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub tracking_gains: PidGains,
    pub winch_gains: PidGains,
    /// Pixel-servo proportional gain, 1/s.
    pub servo_gain: f64,
    pub spline_degree: usize,
    /// Nominal speed used to time transit splines, m/s.
    pub transit_speed: f64,
    /// Terrain lookahead for flipper arm posture, m.
    pub arm_lookahead: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        // JSON knows no infinities, so config gains carry finite limits wide
        // enough to never bind before the actuator clamps do.
        Self {
            tracking_gains: default_tracking_gains()
                .with_integral_limits(-2.0, 2.0)
                .with_output_limits(-10.0, 10.0),
            winch_gains: default_winch_gains()
                .with_integral_limits(-1.0, 1.0)
                .with_output_limits(-2.0, 2.0),
            servo_gain: 1.5,
            spline_degree: 3,
            transit_speed: 1.0,
            arm_lookahead: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultConfig {
    /// Drop the first N magnet release commands on the floor.
    pub epm_release_failures: u32,
    /// Camera outage relative to entering the lowering phase.
    pub camera_blackout: Option<BlackoutConfig>,
    /// Pendulum excitation noise fed to the tether head, rad/s^1.5.
    pub swing_noise_sigma: f64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            epm_release_failures: 0,
            camera_blackout: None,
            swing_noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackoutConfig {
    /// Seconds after entering the lowering phase when frames stop.
    pub after: f64,
    /// Outage length, s.
    pub duration: f64,
}

/// One config problem. `field` is a dotted path into the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn check(out: &mut Vec<Violation>, ok: bool, field: &str, message: impl Into<String>) {
    if !ok {
        out.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }
}

const PHASE_NAMES: [&str; 14] = [
    "Idle",
    "ScanAndMap",
    "SelectZone",
    "PositionOverZone",
    "LowerTether",
    "VerifyTouchdown",
    "Detach",
    "GroundOps",
    "ReturnAndSignal",
    "AlignForRetrieval",
    "Reattach",
    "Retract",
    "Done",
    "Aborted",
];

/// Checks the whole config and reports every violation found.
pub fn validate_config(config: &ScenarioConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let c = config;

    check(&mut v, c.dt > 0.0 && c.dt <= 0.1, "dt", "must be in (0, 0.1] s");
    check(
        &mut v,
        c.duration_limit.is_finite() && c.duration_limit > 0.0,
        "duration_limit",
        "must be a positive number of seconds",
    );

    let extent = c.terrain.extent();
    let cell = c.terrain.cell_size();
    check(&mut v, extent > 0.0, "terrain.extent", "must be positive");
    check(
        &mut v,
        cell > 0.0 && cell <= extent,
        "terrain.cell_size",
        "must be positive and no larger than the extent",
    );
    if let TerrainConfig::Procedural {
        amplitude,
        feature_size,
        ..
    } = &c.terrain
    {
        check(&mut v, *amplitude >= 0.0, "terrain.amplitude", "must be >= 0");
        check(&mut v, *feature_size > 0.0, "terrain.feature_size", "must be positive");
    }
    for (i, b) in c.boxes.iter().enumerate() {
        check(
            &mut v,
            b.min[0] < b.max[0] && b.min[1] < b.max[1],
            &format!("boxes[{i}]"),
            "min corner must be strictly below max corner",
        );
        check(&mut v, b.height > 0.0, &format!("boxes[{i}].height"), "must be positive");
    }
    let half = extent / 2.0;
    check(
        &mut v,
        c.entry_point[0].abs() <= half && c.entry_point[1].abs() <= half,
        "entry_point",
        "must lie inside the terrain extent",
    );
    if c.start_at_retrieval {
        check(
            &mut v,
            c.retrieval_site[0].abs() <= half && c.retrieval_site[1].abs() <= half,
            "retrieval_site",
            "must lie inside the terrain extent",
        );
        check(
            &mut v,
            c.mission.mode == crate::mission::MissionMode::Detached,
            "start_at_retrieval",
            "retrieval-only runs require detached mode",
        );
    }

    check(&mut v, c.uav.max_speed > 0.0, "uav.max_speed", "must be positive");
    check(
        &mut v,
        c.uav.payload_capacity > 0.0,
        "uav.payload_capacity",
        "must be positive",
    );
    let carried = c.ugv.mass + c.ugv.payload_mass + c.uav.module_mass + c.head.mass;
    check(
        &mut v,
        carried <= c.uav.payload_capacity,
        "uav.payload_capacity",
        format!(
            "carried mass {:.2} kg (vehicle + payload + module + head) exceeds capacity {:.2} kg",
            carried, c.uav.payload_capacity
        ),
    );

    check(&mut v, c.winch.max_length > 0.0, "winch.max_length", "must be positive");
    check(&mut v, c.winch.drum_radius > 0.0, "winch.drum_radius", "must be positive");
    check(&mut v, c.winch.encoder_cpr >= 1, "winch.encoder_cpr", "must be at least 1");
    check(&mut v, c.winch.tau > 0.0, "winch.tau", "must be positive");
    check(&mut v, c.winch.max_rate > 0.0, "winch.max_rate", "must be positive");
    check(
        &mut v,
        (0.0..=c.winch.max_length).contains(&c.winch.initial_length),
        "winch.initial_length",
        "must be between 0 and max_length",
    );

    check(&mut v, c.head.capture_radius > 0.0, "head.capture_radius", "must be positive");
    check(&mut v, c.head.radius > 0.0, "head.radius", "must be positive");
    check(&mut v, c.head.mass > 0.0, "head.mass", "must be positive");

    check(&mut v, c.ugv.mass > 0.0, "ugv.mass", "must be positive");
    check(&mut v, c.ugv.payload_mass >= 0.0, "ugv.payload_mass", "must be >= 0");
    check(
        &mut v,
        c.ugv.max_track_speed > 0.0,
        "ugv.max_track_speed",
        "must be positive",
    );
    for (i, d) in c.ugv.footprint_mm.iter().enumerate() {
        check(
            &mut v,
            *d > 0.0 && *d <= TRANSPORT_ENVELOPE_MM,
            &format!("ugv.footprint_mm[{i}]"),
            format!("must be positive and within the {TRANSPORT_ENVELOPE_MM} mm envelope"),
        );
    }
    check(
        &mut v,
        c.ugv.extended_length_mm >= c.ugv.footprint_mm[0],
        "ugv.extended_length_mm",
        "cannot be shorter than the folded length",
    );
    check(
        &mut v,
        c.ugv.extended_length_mm <= TRANSPORT_ENVELOPE_MM || c.stow_arms_for_transport,
        "ugv.extended_length_mm",
        format!(
            "{} mm exceeds the {TRANSPORT_ENVELOPE_MM} mm envelope; fold the arms for transport",
            c.ugv.extended_length_mm
        ),
    );

    check(&mut v, c.camera.width >= 8 && c.camera.height >= 8, "camera", "must be at least 8x8");
    check(&mut v, c.camera.fx > 0.0 && c.camera.fy > 0.0, "camera", "focal lengths must be positive");
    check(&mut v, c.camera.max_range > 0.0, "camera.max_range", "must be positive");
    check(&mut v, c.camera.noise_sigma >= 0.0, "camera.noise_sigma", "must be >= 0");

    let p = &c.perception;
    check(&mut v, p.dbscan_eps > 0.0, "perception.dbscan_eps", "must be positive");
    check(&mut v, p.dbscan_min_pts >= 1, "perception.dbscan_min_pts", "must be at least 1");
    check(&mut v, p.normal_k >= 3, "perception.normal_k", "needs at least 3 neighbours");
    check(&mut v, p.normal_radius > 0.0, "perception.normal_radius", "must be positive");
    check(
        &mut v,
        p.slope_threshold_deg > 0.0 && p.slope_threshold_deg < 90.0,
        "perception.slope_threshold_deg",
        "must be in (0, 90)",
    );
    check(
        &mut v,
        (0.0..=1.0).contains(&p.fuse_alpha),
        "perception.fuse_alpha",
        "must be in [0, 1]",
    );
    check(&mut v, p.voxel_size > 0.0, "perception.voxel_size", "must be positive");
    check(&mut v, p.aoi_radius > 0.0, "perception.aoi_radius", "must be positive");
    check(&mut v, p.zone_min_patch_radius > 0.0, "perception.zone_min_patch_radius", "must be positive");
    check(
        &mut v,
        p.zone_min_navigable_fraction > 0.0 && p.zone_min_navigable_fraction <= 1.0,
        "perception.zone_min_navigable_fraction",
        "must be in (0, 1]",
    );
    check(&mut v, p.near_clip >= 0.0, "perception.near_clip", "must be >= 0");
    check(&mut v, p.scan_radius > 0.0, "perception.scan_radius", "must be positive");
    for (name, period) in [
        ("perception.scan_render_period", p.scan_render_period),
        ("perception.render_period", p.render_period),
        ("perception.telemetry_period", p.telemetry_period),
    ] {
        check(&mut v, period >= c.dt, name, "must be at least one simulation step");
    }

    check(
        &mut v,
        c.control.spline_degree >= 1,
        "control.spline_degree",
        "must be at least 1",
    );
    check(&mut v, c.control.transit_speed > 0.0, "control.transit_speed", "must be positive");
    check(&mut v, c.control.servo_gain > 0.0, "control.servo_gain", "must be positive");
    check(&mut v, c.control.arm_lookahead > 0.0, "control.arm_lookahead", "must be positive");
    for (name, g) in [
        ("control.tracking_gains", &c.control.tracking_gains),
        ("control.winch_gains", &c.control.winch_gains),
    ] {
        let finite = g.kp.is_finite() && g.ki.is_finite() && g.kd.is_finite();
        check(&mut v, finite && g.kp >= 0.0 && g.ki >= 0.0 && g.kd >= 0.0, name, "gains must be finite and non-negative");
    }

    let m = &c.mission;
    check(&mut v, m.d_min > 0.0, "mission.d_min", "must be positive");
    check(&mut v, m.touchdown_threshold > 0.0, "mission.touchdown_threshold", "must be positive");
    check(&mut v, m.min_separation > 0.0, "mission.min_separation", "must be positive");
    check(&mut v, m.max_attempts >= 1, "mission.max_attempts", "must be at least 1");
    check(
        &mut v,
        m.descent_rate > 0.0 && m.descent_rate <= c.winch.max_rate,
        "mission.descent_rate",
        "must be positive and within the winch rate limit",
    );
    check(&mut v, m.verify_window >= 2, "mission.verify_window", "needs at least 2 samples");
    check(
        &mut v,
        m.verify_sample_period >= c.dt,
        "mission.verify_sample_period",
        "must be at least one simulation step",
    );
    check(
        &mut v,
        m.verify_timeout >= m.verify_window as f64 * m.verify_sample_period,
        "mission.verify_timeout",
        "must allow at least one full verification window",
    );
    check(&mut v, m.stationary_speed > 0.0, "mission.stationary_speed", "must be positive");
    check(&mut v, m.align_threshold_px > 0.0, "mission.align_threshold_px", "must be positive");
    check(&mut v, m.position_tolerance > 0.0, "mission.position_tolerance", "must be positive");
    check(
        &mut v,
        m.deploy_altitude > 0.0 && m.deploy_altitude < c.winch.max_length,
        "mission.deploy_altitude",
        "must be positive and within tether reach",
    );
    check(&mut v, m.scan_altitude > 0.0, "mission.scan_altitude", "must be positive");

    let f = &c.faults;
    check(&mut v, f.swing_noise_sigma >= 0.0, "faults.swing_noise_sigma", "must be >= 0");
    if let Some(b) = &f.camera_blackout {
        check(&mut v, b.after >= 0.0, "faults.camera_blackout.after", "must be >= 0");
        check(&mut v, b.duration > 0.0, "faults.camera_blackout.duration", "must be positive");
    }

    if let Some(stop) = &c.stop_after {
        check(
            &mut v,
            PHASE_NAMES.contains(&stop.as_str()),
            "stop_after",
            format!("unknown phase name {stop:?}"),
        );
    }

    v
}
