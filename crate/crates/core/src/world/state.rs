//! State types for every body in the scene plus the per-step command set.

use crate::geom::{rot_z, wrap_angle, Vec3};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Terrain;

/// Position plus heading. `upright` is false while the body is flipped on
/// its back; only the ground vehicle ever clears it.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
    pub upright: bool,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
            upright: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub pose: Pose,
    pub velocity: Vec3,
    pub max_speed: f64,
    /// Rated lift budget for everything hanging below the airframe, kg.
    pub payload_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WinchState {
    pub deployed_length: f64,
    pub max_length: f64,
    /// Actual payout rate, m/s. Positive pays out, negative retracts.
    pub rate: f64,
    pub drum_radius: f64,
    pub encoder_cpr: u32,
    /// Tether exit point relative to the UAV body origin.
    pub anchor_offset: Vec3,
    /// First-order lag of the drum motor responding to a rate command, s.
    pub tau: f64,
    pub max_rate: f64,
}

impl WinchState {
    pub fn anchor_world(&self, uav: &UavState) -> Vec3 {
        uav.pose.position + rot_z(uav.pose.yaw) * self.anchor_offset
    }
}

/// Magnetic coupler hanging at the end of the tether.
#[derive(Debug, Clone, PartialEq)]
pub struct TetherHeadState {
    pub position: Vec3,
    /// Pendulum tilt angles about the world x and y axes, rad.
    pub swing: [f64; 2],
    pub swing_rate: [f64; 2],
    pub epm_on: bool,
    /// True while the electro-permanent magnet grips the vehicle plate.
    pub attached: bool,
    pub capture_radius: f64,
    /// Physical radius used by the depth renderer.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UgvState {
    pub pose: Pose,
    /// Left/right track surface speeds, m/s.
    pub track_speeds: [f64; 2],
    /// Front/rear flipper arm angles, rad.
    pub arm_angles: [f64; 2],
    pub mass: f64,
    pub carrying_payload: bool,
    pub payload_mass: f64,
    /// Stowed body length/width/height in millimetres.
    pub footprint_mm: [f64; 3],
    /// Body length with arms extended, millimetres.
    pub extended_length_mm: f64,
    pub grounded: bool,
    /// Vertical speed while free-falling after release, m/s.
    pub vertical_velocity: f64,
}

impl Default for UgvState {
    /// Stock tracked vehicle: 330 x 330 x 100 mm body, 490 mm with the arms
    /// extended, 3.68 kg, upright at the origin.
    fn default() -> Self {
        Self {
            pose: Pose::new(Vec3::zeros(), 0.0),
            track_speeds: [0.0, 0.0],
            arm_angles: [0.0, 0.0],
            mass: 3.68,
            carrying_payload: false,
            payload_mass: 0.0,
            footprint_mm: [330.0, 330.0, 100.0],
            extended_length_mm: 490.0,
            grounded: true,
            vertical_velocity: 0.0,
        }
    }
}

impl UgvState {
    pub fn height_m(&self) -> f64 {
        self.footprint_mm[2] / 1000.0
    }

    pub fn length_m(&self) -> f64 {
        self.footprint_mm[0] / 1000.0
    }

    pub fn width_m(&self) -> f64 {
        self.footprint_mm[1] / 1000.0
    }

    /// Magnet plate centre on top of the chassis.
    pub fn attach_point(&self) -> Vec3 {
        self.pose.position + Vec3::new(0.0, 0.0, self.height_m())
    }

    pub fn speed(&self) -> f64 {
        0.5 * (self.track_speeds[0] + self.track_speeds[1])
    }
}

/// Tunables that are properties of the scene rather than of one body.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldParams {
    /// Swing magnitude at touchdown beyond which the vehicle lands flipped.
    pub flip_swing_threshold: f64,
    /// Std-dev of random angular-rate kicks applied to the head swing, rad/s
    /// per sqrt(step). Zero disables the noise entirely.
    pub swing_noise_sigma: f64,
    /// Deployed length at or below which the head counts as stowed.
    pub stow_tolerance: f64,
    pub max_track_speed: f64,
    pub max_arm_rate: f64,
    /// Horizontal anchor-to-vehicle offset below which a taut tether hoists
    /// the vehicle instead of dragging it.
    pub lift_horizontal_tol: f64,
    pub gravity: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            flip_swing_threshold: 45f64.to_radians(),
            swing_noise_sigma: 0.0,
            stow_tolerance: 0.16,
            max_track_speed: 0.5,
            max_arm_rate: 2.0,
            lift_horizontal_tol: 0.25,
            gravity: crate::geom::GRAVITY,
        }
    }
}

/// Everything `step` needs from the outside for one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Commands {
    pub uav_velocity: Vec3,
    /// Requested winch payout rate; the drum follows it with a lag.
    pub winch_rate: f64,
    pub track_speeds: [f64; 2],
    pub arm_rates: [f64; 2],
    pub epm: Option<bool>,
}

impl Default for Commands {
    fn default() -> Self {
        Self {
            uav_velocity: Vec3::zeros(),
            winch_rate: 0.0,
            track_speeds: [0.0, 0.0],
            arm_rates: [0.0, 0.0],
            epm: None,
        }
    }
}

impl Commands {
    pub fn finite(&self) -> Result<(), &'static str> {
        if !self.uav_velocity.iter().all(|v| v.is_finite()) {
            return Err("uav_velocity");
        }
        if !self.winch_rate.is_finite() {
            return Err("winch_rate");
        }
        if !self.track_speeds.iter().all(|v| v.is_finite()) {
            return Err("track_speeds");
        }
        if !self.arm_rates.iter().all(|v| v.is_finite()) {
            return Err("arm_rates");
        }
        Ok(())
    }
}

/// Notable things that happened during one step, for the event log.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldEvent {
    EpmAttached,
    EpmDetached,
    Touchdown { flipped: bool, swing_mag: f64 },
    Liftoff,
    TetherTaut { deficit: f64 },
    WinchWhileHeadFree,
    SelfRightStarted,
    SelfRightCompleted,
}

/// Complete simulation state. Stepping is bit-deterministic: the same state,
/// commands and seed always produce the same successor.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub terrain: Terrain,
    pub uav: UavState,
    pub winch: WinchState,
    pub head: TetherHeadState,
    pub ugv: UgvState,
    pub params: WorldParams,
    pub dt: f64,
    step_count: u64,
    pub(super) rng: ChaCha8Rng,
    /// Swing recorded at release, used to judge the landing if the vehicle
    /// falls free after detaching.
    pub(super) swing_at_release: [f64; 2],
    /// Latch so winching against a free head reports once per spell, not
    /// once per tick.
    pub(super) winching_free: bool,
}

impl WorldState {
    pub fn new(
        terrain: Terrain,
        uav: UavState,
        winch: WinchState,
        head: TetherHeadState,
        ugv: UgvState,
        params: WorldParams,
        dt: f64,
        seed: u64,
    ) -> Self {
        Self {
            terrain,
            uav,
            winch,
            head,
            ugv,
            params,
            dt,
            step_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x57_4f52_4c44),
            swing_at_release: [0.0, 0.0],
            winching_free: false,
        }
    }

    /// Simulation time, exactly `step_count * dt`.
    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.dt
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub(super) fn advance_clock(&mut self) {
        self.step_count += 1;
    }

    pub fn anchor_world(&self) -> Vec3 {
        self.winch.anchor_world(&self.uav)
    }

    pub fn head_stowed(&self) -> bool {
        self.winch.deployed_length <= self.params.stow_tolerance
    }

    /// Hash of all dynamic quantities, for bit-identical replay checks.
    pub fn digest(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let mut put = |v: f64| v.to_bits().hash(&mut h);
        for v in self.uav.pose.position.iter() {
            put(*v);
        }
        put(self.uav.pose.yaw);
        for v in self.uav.velocity.iter() {
            put(*v);
        }
        put(self.winch.deployed_length);
        put(self.winch.rate);
        for v in self.head.position.iter() {
            put(*v);
        }
        put(self.head.swing[0]);
        put(self.head.swing[1]);
        put(self.head.swing_rate[0]);
        put(self.head.swing_rate[1]);
        for v in self.ugv.pose.position.iter() {
            put(*v);
        }
        put(self.ugv.pose.yaw);
        put(self.ugv.arm_angles[0]);
        put(self.ugv.arm_angles[1]);
        put(self.ugv.vertical_velocity);
        let mut tail = std::collections::hash_map::DefaultHasher::new();
        (
            self.head.epm_on,
            self.head.attached,
            self.ugv.grounded,
            self.ugv.pose.upright,
            self.step_count,
        )
            .hash(&mut tail);
        h.finish() ^ tail.finish()
    }

    /// Checks the structural invariants that must hold after every step.
    /// Returns human-readable violations; empty means consistent.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.head.attached && !self.head.epm_on {
            out.push("attached head with magnet off".into());
        }
        if self.head.attached {
            let dist = (self.head.position - self.anchor_world()).norm();
            if dist > self.winch.deployed_length + 1e-6 {
                out.push(format!(
                    "tether infeasible: head at {dist:.6} m from anchor, only {:.6} m deployed",
                    self.winch.deployed_length
                ));
            }
        }
        if self.winch.deployed_length < -1e-12
            || self.winch.deployed_length > self.winch.max_length + 1e-12
        {
            out.push(format!(
                "deployed length {} outside [0, {}]",
                self.winch.deployed_length, self.winch.max_length
            ));
        }
        if let Ok(ground) = self
            .terrain
            .height_at(self.head.position.x, self.head.position.y)
        {
            if self.head.position.z < ground - 1e-6 {
                out.push("head below terrain".into());
            }
        }
        if let Ok(ground) = self
            .terrain
            .height_at(self.ugv.pose.position.x, self.ugv.pose.position.y)
        {
            if self.ugv.pose.position.z < ground - 1e-6 {
                out.push("vehicle below terrain".into());
            }
        }
        if self.head.swing[0].abs() >= std::f64::consts::FRAC_PI_2
            || self.head.swing[1].abs() >= std::f64::consts::FRAC_PI_2
        {
            out.push("head swing beyond +-90 degrees".into());
        }
        out
    }
}
