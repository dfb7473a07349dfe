//! Pinhole depth camera rendered by casting per-pixel rays against the
//! terrain heightfield, the vehicle body box and the tether-head sphere.

use crate::geom::{rot_z, Vec3};
use crate::world::WorldState;
use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SensorError;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub max_range: f64,
}

impl CameraIntrinsics {
    pub fn new(
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        max_range: f64,
    ) -> Result<Self, SensorError> {
        if width == 0 || height == 0 {
            return Err(SensorError::InvalidIntrinsics("zero image dimension".into()));
        }
        if !(fx > 0.0) || !(fy > 0.0) {
            return Err(SensorError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(max_range > 0.0) {
            return Err(SensorError::InvalidIntrinsics(format!(
                "max_range must be positive, got {max_range}"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(SensorError::InvalidIntrinsics("non-finite centre".into()));
        }
        Ok(Self {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            max_range,
        })
    }
}

/// Optional zero-mean Gaussian noise applied to finite depths. Rendering is
/// a pure function of world, intrinsics and this seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Row-major depth map; `NaN` marks pixels with no return. Depths are
/// distances along the optical axis, so back-projection is
/// `((u - cx) d / fx, (v - cy) d / fy, d)`.
#[derive(Debug, Clone)]
pub struct DepthImage {
    pub intrinsics: CameraIntrinsics,
    pub camera_position: Vec3,
    pub camera_yaw: f64,
    pub depths: Vec<f64>,
}

impl DepthImage {
    pub fn depth(&self, u: u32, v: u32) -> f64 {
        self.depths[(v * self.intrinsics.width + u) as usize]
    }

    pub fn finite_count(&self) -> usize {
        self.depths.iter().filter(|d| d.is_finite()).count()
    }
}

/// Camera-to-world rotation for a downward-mounted camera: image x maps to
/// body x, image y to -y, optical axis to -z, then the body yaw is applied.
pub(crate) fn camera_rotation(yaw: f64) -> Matrix3<f64> {
    rot_z(yaw) * Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)
}

/// Projects a world point into the image. `None` when the point sits on or
/// behind the image plane.
pub fn project_point(
    point: &Vec3,
    camera_position: &Vec3,
    camera_yaw: f64,
    intr: &CameraIntrinsics,
) -> Option<(f64, f64)> {
    let rel = camera_rotation(camera_yaw).transpose() * (point - camera_position);
    if rel.z <= 1e-9 {
        return None;
    }
    Some((
        intr.cx + intr.fx * rel.x / rel.z,
        intr.cy + intr.fy * rel.y / rel.z,
    ))
}

/// Renders the scene from the UAV body origin looking straight down.
pub fn render_depth(
    world: &WorldState,
    intr: &CameraIntrinsics,
    noise: Option<&DepthNoise>,
) -> DepthImage {
    let cam = world.uav.pose.position;
    let yaw = world.uav.pose.yaw;
    let rot = camera_rotation(yaw);

    let ugv_half = Vec3::new(
        world.ugv.length_m() / 2.0,
        world.ugv.width_m() / 2.0,
        world.ugv.height_m() / 2.0,
    );
    let ugv_center = world.ugv.pose.position + Vec3::new(0.0, 0.0, ugv_half.z);
    let ugv_rot_inv = rot_z(-world.ugv.pose.yaw);

    let mut depths = Vec::with_capacity((intr.width * intr.height) as usize);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let px = (u as f64 - intr.cx) / intr.fx;
            let py = (v as f64 - intr.cy) / intr.fy;
            // Parameterise by optical-axis depth: the direction has z-depth
            // component exactly 1, so the ray parameter is the stored depth.
            let dir = rot * Vec3::new(px, py, 1.0);
            let mut best = f64::INFINITY;
            if let Some(s) = terrain_hit(world, &cam, &dir, intr.max_range) {
                best = best.min(s);
            }
            if let Some(s) = box_hit(&cam, &dir, &ugv_center, &ugv_rot_inv, &ugv_half) {
                best = best.min(s);
            }
            if let Some(s) = sphere_hit(&cam, &dir, &world.head.position, world.head.radius) {
                best = best.min(s);
            }
            if best > intr.max_range || !best.is_finite() {
                depths.push(f64::NAN);
            } else {
                depths.push(best);
            }
        }
    }

    if let Some(n) = noise {
        if n.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
            for d in depths.iter_mut() {
                if d.is_finite() {
                    let k: f64 = rng.sample(StandardNormal);
                    *d = (*d + n.sigma * k).clamp(1e-6, intr.max_range);
                }
            }
        }
    }

    DepthImage {
        intrinsics: intr.clone(),
        camera_position: cam,
        camera_yaw: yaw,
        depths,
    }
}

/// First heightfield crossing along the ray, found by marching the bracket
/// where the terrain can possibly intersect and bisecting the sign change.
fn terrain_hit(world: &WorldState, cam: &Vec3, dir: &Vec3, max_range: f64) -> Option<f64> {
    debug_assert!((dir.z + 1.0).abs() < 1e-9);
    let above = |s: f64| -> Option<f64> {
        let p = cam + dir * s;
        world.terrain.height_at(p.x, p.y).ok().map(|h| p.z - h)
    };

    let s_lo = ((cam.z - world.terrain.max_height()).max(1e-6)).min(max_range);
    let s_hi = ((cam.z - world.terrain.min_height()).min(max_range)).max(s_lo);
    if s_lo >= max_range {
        return None;
    }

    let h_speed = dir.x.hypot(dir.y);
    if h_speed < 1e-12 {
        // Nadir ray: the lateral position is fixed, solve directly.
        let h = world.terrain.height_at(cam.x, cam.y).ok()?;
        let s = cam.z - h;
        return (s > 1e-6 && s <= max_range).then_some(s);
    }

    let ds = (world.terrain.cell_size() / (2.0 * h_speed)).min(0.25).max(1e-3);
    let mut prev_s = s_lo;
    let mut prev_f = above(s_lo);
    if let Some(f) = prev_f {
        if f <= 0.0 {
            return Some(s_lo);
        }
    }
    let mut s = s_lo;
    while s < s_hi {
        s = (s + ds).min(s_hi);
        let f = above(s);
        if let (Some(fp), Some(fc)) = (prev_f, f) {
            if fp > 0.0 && fc <= 0.0 {
                // Bisect the crossing to sub-nanometre precision.
                let (mut a, mut b) = (prev_s, s);
                for _ in 0..50 {
                    let m = 0.5 * (a + b);
                    match above(m) {
                        Some(fm) if fm > 0.0 => a = m,
                        _ => b = m,
                    }
                }
                return Some(0.5 * (a + b));
            }
        }
        prev_s = s;
        prev_f = f;
        if s >= s_hi {
            break;
        }
    }
    None
}

/// Slab test against the vehicle's oriented box. Returns the entry depth.
fn box_hit(
    cam: &Vec3,
    dir: &Vec3,
    center: &Vec3,
    rot_inv: &Matrix3<f64>,
    half: &Vec3,
) -> Option<f64> {
    let o = rot_inv * (cam - center);
    let d = rot_inv * dir;
    let mut t_min = 1e-6f64;
    let mut t_max = f64::INFINITY;
    for axis in 0..3 {
        if d[axis].abs() < 1e-15 {
            if o[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[axis];
        let mut t0 = (-half[axis] - o[axis]) * inv;
        let mut t1 = (half[axis] - o[axis]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_min = t_min.max(t0);
        t_max = t_max.min(t1);
        if t_min > t_max {
            return None;
        }
    }
    (t_min > 1e-6).then_some(t_min)
}

fn sphere_hit(cam: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Option<f64> {
    let oc = cam - center;
    let a = dir.norm_squared();
    let b = 2.0 * dir.dot(&oc);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = (-b - disc.sqrt()) / (2.0 * a);
    (s > 1e-6).then_some(s)
}
