//! Fixed-timestep dynamics. One call to [`WorldState::step`] advances the
//! scene by exactly `dt` and reports anything noteworthy that happened.

use crate::geom::{clamp_norm, horizontal_distance, rot_z, wrap_angle, Vec3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Commands, WorldError, WorldEvent, WorldState};

/// Below this deployed length the head is treated as rigidly stowed at the
/// anchor; a pendulum that short would need a smaller timestep than we run.
const MIN_PENDULUM_LENGTH: f64 = 0.05;
const CONTACT_EPS: f64 = 1e-9;

fn swing_dir(swing: [f64; 2]) -> Vec3 {
    let sx = swing[0].sin();
    let sy = swing[1].sin();
    let down = (1.0 - sx * sx - sy * sy).max(0.0).sqrt();
    Vec3::new(sx, sy, -down)
}

impl WorldState {
    /// Advances the world by one tick. Rejects non-finite commands without
    /// touching any state.
    pub fn step(&mut self, cmd: &Commands) -> Result<Vec<WorldEvent>, WorldError> {
        cmd.finite().map_err(WorldError::NonFiniteCommand)?;
        let dt = self.dt;
        let mut events = Vec::new();

        if let Some(on) = cmd.epm {
            events.extend(self.apply_epm(on));
        }

        // UAV flies commanded velocity, clamped to its speed envelope.
        let v_new = clamp_norm(cmd.uav_velocity, self.uav.max_speed);
        let accel = (v_new - self.uav.velocity) / dt;
        self.uav.velocity = v_new;
        self.uav.pose.position += v_new * dt;

        // Winch drum follows the commanded rate with a first-order lag; the
        // deployed length integrates the actual rate and saturates at the
        // ends of travel.
        let winching_free = cmd.winch_rate != 0.0 && !self.head.attached && !self.head_stowed();
        if winching_free && !self.winching_free {
            events.push(WorldEvent::WinchWhileHeadFree);
        }
        self.winching_free = winching_free;
        let rate_cmd = cmd.winch_rate.clamp(-self.winch.max_rate, self.winch.max_rate);
        self.winch.rate += (rate_cmd - self.winch.rate) * dt / self.winch.tau;
        let len_old = self.winch.deployed_length;
        let len_new = (len_old + self.winch.rate * dt).clamp(0.0, self.winch.max_length);
        self.winch.rate = (len_new - len_old) / dt;
        self.winch.deployed_length = len_new;

        self.integrate_swing(accel, dt);
        self.place_bodies(cmd, dt, &mut events);
        self.integrate_arms(cmd, dt);

        // Magnet capture once everything has settled for this tick.
        if self.try_capture() {
            events.push(WorldEvent::EpmAttached);
        }

        if self.params.swing_noise_sigma > 0.0 {
            let s = self.params.swing_noise_sigma * dt.sqrt();
            let k0: f64 = self.rng.sample(StandardNormal);
            let k1: f64 = self.rng.sample(StandardNormal);
            self.head.swing_rate[0] += s * k0;
            self.head.swing_rate[1] += s * k1;
        }

        self.advance_clock();
        debug_assert!(
            self.invariant_violations().is_empty(),
            "world invariants violated: {:?}",
            self.invariant_violations()
        );
        Ok(events)
    }

    /// Switches the electro-permanent magnet. Turning it off while attached
    /// releases the vehicle; turning it on near the plate captures it.
    pub fn command_epm(&mut self, on: bool) -> Vec<WorldEvent> {
        let events = self.apply_epm(on);
        events
    }

    /// Snaps a powered free head to the plate when within capture range.
    /// The magnet can grab from up to `capture_radius` away, so the tether
    /// pays out whatever the snap needs to keep the length feasible.
    fn try_capture(&mut self) -> bool {
        if !self.head.epm_on || self.head.attached {
            return false;
        }
        let attach = self.ugv.attach_point();
        if (self.head.position - attach).norm() > self.head.capture_radius {
            return false;
        }
        self.head.attached = true;
        self.head.position = attach;
        let needed = (attach - self.anchor_world()).norm();
        if needed > self.winch.deployed_length {
            self.winch.deployed_length = needed.min(self.winch.max_length);
        }
        true
    }

    fn apply_epm(&mut self, on: bool) -> Vec<WorldEvent> {
        let mut events = Vec::new();
        if on {
            self.head.epm_on = true;
            if self.try_capture() {
                events.push(WorldEvent::EpmAttached);
            }
        } else {
            self.head.epm_on = false;
            if self.head.attached {
                self.head.attached = false;
                self.swing_at_release = self.head.swing;
                self.ugv.vertical_velocity = 0.0;
                events.push(WorldEvent::EpmDetached);
            }
        }
        events
    }

    /// Scripted arm-sweep recovery for a flipped vehicle. Runs a bounded
    /// number of internal steps (time advances) and ends with the vehicle
    /// upright and the arms back at their default posture.
    pub fn ugv_self_right(&mut self) -> Result<Vec<WorldEvent>, WorldError> {
        if !self.ugv.grounded {
            return Err(WorldError::SelfRightAirborne);
        }
        if self.ugv.carrying_payload {
            return Err(WorldError::SelfRightWithPayload);
        }
        if self.ugv.pose.upright {
            return Ok(Vec::new());
        }
        let mut events = vec![WorldEvent::SelfRightStarted];
        let steps = (2.0 / self.dt).ceil() as usize;
        for i in 0..steps {
            // Arms push down through the first half of the sweep and fold
            // back during the second half.
            let rate = if i < steps / 2 { 1.5 } else { -1.5 };
            let cmd = Commands {
                arm_rates: [rate, rate],
                ..Commands::default()
            };
            events.extend(self.step(&cmd)?);
        }
        self.ugv.pose.upright = true;
        self.ugv.arm_angles = [0.0, 0.0];
        events.push(WorldEvent::SelfRightCompleted);
        Ok(events)
    }

    /// Critically damped pendulum on the swing angles, excited by lateral
    /// acceleration of the anchor.
    fn integrate_swing(&mut self, anchor_accel: Vec3, dt: f64) {
        let len = self.winch.deployed_length;
        if len < MIN_PENDULUM_LENGTH {
            self.head.swing = [0.0, 0.0];
            self.head.swing_rate = [0.0, 0.0];
            return;
        }
        let omega = (self.params.gravity / len).sqrt();
        let drive = [anchor_accel.x, anchor_accel.y];
        for axis in 0..2 {
            let theta = self.head.swing[axis];
            let acc = -drive[axis] / len
                - omega * omega * theta
                - 2.0 * omega * self.head.swing_rate[axis];
            self.head.swing_rate[axis] += acc * dt;
            self.head.swing[axis] += self.head.swing_rate[axis] * dt;
            let lim = std::f64::consts::FRAC_PI_2 - 1e-3;
            if self.head.swing[axis].abs() > lim {
                self.head.swing[axis] = self.head.swing[axis].clamp(-lim, lim);
                self.head.swing_rate[axis] = 0.0;
            }
        }
    }

    fn zero_swing(&mut self) {
        self.head.swing = [0.0, 0.0];
        self.head.swing_rate = [0.0, 0.0];
    }

    fn ground_at(&self, x: f64, y: f64) -> Option<f64> {
        self.terrain.height_at(x, y).ok()
    }

    /// Resolves head and vehicle positions given the new anchor and tether
    /// length, handling touchdown, hoisting and ground contact.
    fn place_bodies(&mut self, cmd: &Commands, dt: f64, events: &mut Vec<WorldEvent>) {
        let anchor = self.anchor_world();
        let len = self.winch.deployed_length;
        let hang = anchor + swing_dir(self.head.swing) * len;

        if self.head.attached {
            if self.ugv.grounded {
                self.integrate_tracks(cmd, dt);
                let attach = self.ugv.attach_point();
                let dist = (attach - anchor).norm();
                if len + CONTACT_EPS < dist {
                    if horizontal_distance(&anchor, &attach) <= self.params.lift_horizontal_tol {
                        // Straight-up pull: the vehicle comes off the ground.
                        self.ugv.grounded = false;
                        self.zero_swing();
                        let head = anchor + swing_dir(self.head.swing) * len;
                        self.head.position = head;
                        self.ugv.pose.position = head - Vec3::new(0.0, 0.0, self.ugv.height_m());
                        events.push(WorldEvent::Liftoff);
                    } else {
                        // Sideways drag would wedge the vehicle; refuse to
                        // shorten below the geometric distance and flag it.
                        events.push(WorldEvent::TetherTaut { deficit: dist - len });
                        self.winch.deployed_length = dist.min(self.winch.max_length);
                        self.winch.rate = 0.0;
                        self.head.position = attach;
                        self.zero_swing();
                    }
                } else {
                    self.head.position = attach;
                    self.zero_swing();
                }
            } else {
                // Assembly hangs under the anchor.
                let bottom = hang.z - self.ugv.height_m();
                let ground = self.ground_at(hang.x, hang.y).unwrap_or(f64::NEG_INFINITY);
                if bottom <= ground + CONTACT_EPS {
                    let swing_mag = self.head.swing[0].hypot(self.head.swing[1]);
                    let flipped = swing_mag > self.params.flip_swing_threshold;
                    self.ugv.grounded = true;
                    self.ugv.pose.position = Vec3::new(hang.x, hang.y, ground);
                    if flipped {
                        self.ugv.pose.upright = false;
                    }
                    self.head.position = self.ugv.attach_point();
                    self.zero_swing();
                    events.push(WorldEvent::Touchdown { flipped, swing_mag });
                } else {
                    self.head.position = hang;
                    self.ugv.pose.position = hang - Vec3::new(0.0, 0.0, self.ugv.height_m());
                }
            }
        } else {
            // Free head on the tether: hangs, but may rest on the vehicle
            // body or the ground.
            let mut head = hang;
            let body_offset = rot_z(-self.ugv.pose.yaw)
                * (Vec3::new(head.x, head.y, 0.0)
                    - Vec3::new(self.ugv.pose.position.x, self.ugv.pose.position.y, 0.0));
            let over_body = body_offset.x.abs() <= self.ugv.length_m() / 2.0
                && body_offset.y.abs() <= self.ugv.width_m() / 2.0;
            let mut rest = f64::NEG_INFINITY;
            if self.ugv.grounded && over_body {
                rest = self.ugv.attach_point().z;
            }
            if let Some(g) = self.ground_at(head.x, head.y) {
                rest = rest.max(g);
            }
            if head.z < rest {
                head.z = rest;
                self.zero_swing();
            }
            self.head.position = head;

            if self.ugv.grounded {
                self.integrate_tracks(cmd, dt);
            } else {
                // Free fall after an airborne release.
                self.ugv.vertical_velocity -= self.params.gravity * dt;
                self.ugv.pose.position.z += self.ugv.vertical_velocity * dt;
                let p = self.ugv.pose.position;
                if let Some(g) = self.ground_at(p.x, p.y) {
                    if p.z <= g + CONTACT_EPS {
                        self.ugv.pose.position.z = g;
                        self.ugv.grounded = true;
                        self.ugv.vertical_velocity = 0.0;
                        let swing_mag = self.swing_at_release[0].hypot(self.swing_at_release[1]);
                        let flipped = swing_mag > self.params.flip_swing_threshold;
                        if flipped {
                            self.ugv.pose.upright = false;
                        }
                        events.push(WorldEvent::Touchdown { flipped, swing_mag });
                    }
                }
            }
        }
    }

    /// Differential-drive kinematics over the terrain surface.
    fn integrate_tracks(&mut self, cmd: &Commands, dt: f64) {
        let lim = self.params.max_track_speed;
        let vl = cmd.track_speeds[0].clamp(-lim, lim);
        let vr = cmd.track_speeds[1].clamp(-lim, lim);
        self.ugv.track_speeds = [vl, vr];
        let v = 0.5 * (vl + vr);
        let omega = (vr - vl) / self.ugv.width_m();
        let yaw = self.ugv.pose.yaw;
        let nx = self.ugv.pose.position.x + v * yaw.cos() * dt;
        let ny = self.ugv.pose.position.y + v * yaw.sin() * dt;
        if let Some(g) = self.ground_at(nx, ny) {
            self.ugv.pose.position.x = nx;
            self.ugv.pose.position.y = ny;
            self.ugv.pose.position.z = g;
        }
        self.ugv.pose.yaw = wrap_angle(yaw + omega * dt);
    }

    /// Flipper arms integrate their commanded rates. Carrying a payload
    /// restricts both arms to the forward upper quadrant.
    fn integrate_arms(&mut self, cmd: &Commands, dt: f64) {
        let lim = self.params.max_arm_rate;
        for axis in 0..2 {
            let rate = cmd.arm_rates[axis].clamp(-lim, lim);
            let next = self.ugv.arm_angles[axis] + rate * dt;
            self.ugv.arm_angles[axis] = if self.ugv.carrying_payload {
                next.clamp(0.0, std::f64::consts::FRAC_PI_2)
            } else {
                wrap_angle(next)
            };
        }
    }
}
