//! Image-space servo: steer the carrier so a tracked pixel moves to the
//! principal point, used to re-centre over the vehicle before reattachment.

use crate::geom::{rot_z, Vec3};
use crate::sensors::CameraIntrinsics;

use super::tracking::VelocityCommand;

/// Lateral velocity proportional to the normalized pixel offset scaled by
/// altitude (small-angle ground-plane mapping through the nadir camera).
/// The image v axis points opposite world y for a downward camera, hence
/// the sign flip. Vertical component and yaw rate are zero.
pub fn servo_alignment(
    target_px: (f64, f64),
    intrinsics: &CameraIntrinsics,
    altitude: f64,
    camera_yaw: f64,
    gain: f64,
) -> VelocityCommand {
    let u_norm = (target_px.0 - intrinsics.cx) / intrinsics.fx;
    let v_norm = (target_px.1 - intrinsics.cy) / intrinsics.fy;
    let scale = gain * altitude.max(0.0);
    VelocityCommand {
        linear: rot_z(camera_yaw) * Vec3::new(scale * u_norm, -scale * v_norm, 0.0),
        yaw_rate: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(160, 120, 120.0, 120.0, 80.0, 60.0, 10.0).unwrap()
    }

    #[test]
    fn centered_target_is_zero_command() {
        let cmd = servo_alignment((80.0, 60.0), &intr(), 2.0, 0.0, 1.0);
        assert_relative_eq!(cmd.linear.norm(), 0.0);
    }

    #[test]
    fn right_of_center_drives_positive_x() {
        let cmd = servo_alignment((80.0 + 12.0, 60.0), &intr(), 2.0, 0.0, 1.0);
        assert_relative_eq!(cmd.linear.x, 0.2, epsilon = 1e-12);
        assert_relative_eq!(cmd.linear.y, 0.0);
        assert_relative_eq!(cmd.linear.z, 0.0);
    }

    #[test]
    fn below_center_drives_negative_y() {
        // +v in the image is -y in the world for the nadir camera.
        let cmd = servo_alignment((80.0, 60.0 + 12.0), &intr(), 2.0, 0.0, 1.0);
        assert_relative_eq!(cmd.linear.x, 0.0);
        assert_relative_eq!(cmd.linear.y, -0.2, epsilon = 1e-12);
    }

    #[test]
    fn yaw_rotates_the_command_into_world_frame() {
        let cmd = servo_alignment((80.0 + 12.0, 60.0), &intr(), 2.0, FRAC_PI_2, 1.0);
        assert_relative_eq!(cmd.linear.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(cmd.linear.y, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn converges_on_projected_target() {
        // Carrier offset laterally; the target pixel each step comes from
        // projecting a fixed ground point through the camera model.
        use crate::sensors::project_point;
        let intr = intr();
        let ground = Vec3::new(1.0, -0.5, 0.0);
        let mut pos = Vec3::new(0.3, 0.2, 2.5);
        let dt = 0.01;
        let mut final_err = f64::INFINITY;
        for _ in 0..200 {
            let (u, v) = project_point(&ground, &pos, 0.0, &intr).expect("target visible");
            let cmd = servo_alignment((u, v), &intr, pos.z, 0.0, 1.5);
            pos += cmd.linear * dt;
            final_err = ((u - intr.cx).powi(2) + (v - intr.cy).powi(2)).sqrt();
        }
        assert!(final_err < 5.0, "pixel error {final_err} after 200 steps");
    }

    proptest! {
        #[test]
        fn magnitude_monotone_in_pixel_error(
            du in -40.0f64..40.0,
            dv in -30.0f64..30.0,
            shrink in 0.0f64..1.0,
        ) {
            let intr = intr();
            let big = servo_alignment((intr.cx + du, intr.cy + dv), &intr, 2.0, 0.3, 1.0);
            let small = servo_alignment(
                (intr.cx + shrink * du, intr.cy + shrink * dv),
                &intr,
                2.0,
                0.3,
                1.0,
            );
            prop_assert!(small.linear.norm() <= big.linear.norm() + 1e-12);
        }
    }
}
