//! Small geometry helpers shared across modules.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;

pub const GRAVITY: f64 = 9.81;

/// Rotation about the world z axis. Positive yaw turns x toward y.
pub fn rot_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Wraps an angle into [-pi, pi).
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi);
    if r < 0.0 {
        r += two_pi;
    }
    r - std::f64::consts::PI
}

/// Scales `v` down so its norm does not exceed `max`. Zero and negative
/// limits collapse to the zero vector.
pub fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    if max <= 0.0 {
        return Vec3::zeros();
    }
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

pub fn horizontal_distance(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}
