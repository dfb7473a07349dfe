//! Clamped uniform B-splines evaluated with de Boor's recursion. Waypoints
//! become control points directly, so the curve approximates the interior
//! waypoints but interpolates the endpoints exactly.

use crate::geom::Vec3;

use super::ControlError;

#[derive(Debug, Clone, PartialEq)]
pub struct BSpline {
    degree: usize,
    control_points: Vec<Vec3>,
    /// Clamped knot vector over [0, duration], length = points + degree + 1.
    knots: Vec<f64>,
    duration: f64,
}

impl BSpline {
    /// Builds a clamped uniform spline through time `[0, duration]`. With
    /// fewer waypoints than `degree + 1` the degree is lowered to fit, with
    /// a warning.
    pub fn from_waypoints(
        waypoints: &[Vec3],
        degree: usize,
        duration: f64,
    ) -> Result<Self, ControlError> {
        if waypoints.len() < 2 {
            return Err(ControlError::TooFewWaypoints {
                needed: 2,
                got: waypoints.len(),
            });
        }
        if degree < 1 {
            return Err(ControlError::InvalidParameter(
                "spline degree must be at least 1".into(),
            ));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(ControlError::InvalidParameter(
                "spline duration must be positive".into(),
            ));
        }
        if waypoints.iter().any(|w| !(w.x.is_finite() && w.y.is_finite() && w.z.is_finite())) {
            return Err(ControlError::InvalidParameter(
                "waypoints must be finite".into(),
            ));
        }

        let degree = if waypoints.len() < degree + 1 {
            let lowered = waypoints.len() - 1;
            log::warn!(
                "{} waypoints cannot support degree {}; lowering to {}",
                waypoints.len(),
                degree,
                lowered
            );
            lowered
        } else {
            degree
        };

        Ok(Self {
            knots: clamped_uniform_knots(waypoints.len(), degree, duration),
            degree,
            control_points: waypoints.to_vec(),
            duration,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    /// Curve position at time `t`; out-of-domain times clamp with a warning.
    pub fn position(&self, t: f64) -> Vec3 {
        let t = self.clamp_param(t);
        de_boor(&self.control_points, &self.knots, self.degree, t)
    }

    /// Curve velocity at time `t`, from the derivative spline.
    pub fn velocity(&self, t: f64) -> Vec3 {
        let t = self.clamp_param(t);
        if self.degree == 0 {
            return Vec3::zeros();
        }
        let (dcp, dknots) = self.derivative_data();
        de_boor(&dcp, &dknots, self.degree - 1, t)
    }

    fn clamp_param(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            log::warn!(
                "spline parameter {t} outside [0, {}]; clamping",
                self.duration
            );
        }
        t.clamp(0.0, self.duration)
    }

    /// Control points and knots of the derivative spline (one degree lower).
    fn derivative_data(&self) -> (Vec<Vec3>, Vec<f64>) {
        let p = self.degree;
        let cp = &self.control_points;
        let dcp: Vec<Vec3> = (0..cp.len() - 1)
            .map(|i| {
                let span = self.knots[i + p + 1] - self.knots[i + 1];
                if span.abs() < f64::EPSILON {
                    Vec3::zeros()
                } else {
                    (cp[i + 1] - cp[i]) * (p as f64 / span)
                }
            })
            .collect();
        let dknots = self.knots[1..self.knots.len() - 1].to_vec();
        (dcp, dknots)
    }
}

fn clamped_uniform_knots(n: usize, p: usize, duration: f64) -> Vec<f64> {
    let mut knots = Vec::with_capacity(n + p + 1);
    knots.extend(std::iter::repeat(0.0).take(p + 1));
    let interior = n - p - 1;
    for i in 1..=interior {
        knots.push(duration * i as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat(duration).take(p + 1));
    knots
}

/// Index k of the knot span containing t: knots[k] <= t < knots[k+1], with
/// the final span closed on the right.
fn find_span(knots: &[f64], n: usize, p: usize, t: f64) -> usize {
    if t >= knots[n] {
        return n - 1;
    }
    let mut lo = p;
    let mut hi = n - 1;
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if knots[mid] <= t {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

fn de_boor(cp: &[Vec3], knots: &[f64], p: usize, t: f64) -> Vec3 {
    let n = cp.len();
    let k = find_span(knots, n, p, t);
    let mut d: Vec<Vec3> = (0..=p).map(|j| cp[j + k - p]).collect();
    for r in 1..=p {
        for j in (r..=p).rev() {
            let i = j + k - p;
            let denom = knots[i + p - r + 1] - knots[i];
            let alpha = if denom.abs() < f64::EPSILON {
                0.0
            } else {
                (t - knots[i]) / denom
            };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[p]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cubic(rng: &mut ChaCha8Rng, n: usize) -> BSpline {
        let wps: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        BSpline::from_waypoints(&wps, 3, 4.0).unwrap()
    }

    #[test]
    fn two_waypoints_give_constant_velocity_segment() {
        let s = BSpline::from_waypoints(
            &[Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)],
            3,
            2.0,
        )
        .unwrap();
        assert_eq!(s.degree(), 1); // lowered from 3
        assert_relative_eq!(s.position(1.0).x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.velocity(1.0).x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.velocity(0.3).x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoints_interpolated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_cubic(&mut rng, 6);
            let first = s.control_points()[0];
            let last = *s.control_points().last().unwrap();
            assert!((s.position(0.0) - first).norm() < 1e-9);
            assert!((s.position(s.duration()) - last).norm() < 1e-9);
        }
    }

    #[test]
    fn collinear_control_points_stay_collinear() {
        let dir = Vec3::new(1.0, 2.0, -0.5);
        let wps: Vec<Vec3> = (0..6).map(|i| dir * i as f64).collect();
        let s = BSpline::from_waypoints(&wps, 3, 1.0).unwrap();
        let unit = dir.normalize();
        for i in 0..=100 {
            let p = s.position(i as f64 / 100.0);
            let off = p - unit * p.dot(&unit);
            assert!(off.norm() < 1e-9, "sample {i} off the line by {}", off.norm());
        }
    }

    #[test]
    fn velocity_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_cubic(&mut rng, 7);
        let h = 1e-6;
        for i in 1..100 {
            let t = s.duration() * i as f64 / 100.0;
            let fd = (s.position(t + h) - s.position(t - h)) / (2.0 * h);
            let v = s.velocity(t);
            let scale = v.norm().max(1.0);
            assert!(
                (fd - v).norm() / scale < 1e-6,
                "t={t}: fd {fd:?} vs analytic {v:?}"
            );
        }
    }

    #[test]
    fn out_of_domain_parameter_clamps() {
        let s = BSpline::from_waypoints(
            &[Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 1.0, 0.0)],
            2,
            3.0,
        )
        .unwrap();
        assert_eq!(s.position(-1.0), s.position(0.0));
        assert_eq!(s.position(99.0), s.position(3.0));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let a = Vec3::zeros();
        let b = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(
            BSpline::from_waypoints(&[a], 3, 1.0),
            Err(ControlError::TooFewWaypoints { needed: 2, got: 1 })
        );
        assert!(matches!(
            BSpline::from_waypoints(&[a, b], 0, 1.0),
            Err(ControlError::InvalidParameter(_))
        ));
        assert!(matches!(
            BSpline::from_waypoints(&[a, b], 2, 0.0),
            Err(ControlError::InvalidParameter(_))
        ));
        assert!(matches!(
            BSpline::from_waypoints(&[a, Vec3::new(f64::NAN, 0.0, 0.0)], 2, 1.0),
            Err(ControlError::InvalidParameter(_))
        ));
    }

    #[test]
    fn samples_stay_in_control_point_hull() {
        // Support-function check: for any direction, no curve point projects
        // beyond the farthest control point.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let s = random_cubic(&mut rng, 6);
            for _ in 0..10 {
                let d = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if d.norm() < 1e-6 {
                    continue;
                }
                let support = s
                    .control_points()
                    .iter()
                    .map(|c| c.dot(&d))
                    .fold(f64::NEG_INFINITY, f64::max);
                for i in 0..=50 {
                    let t = s.duration() * i as f64 / 50.0;
                    assert!(s.position(t).dot(&d) <= support + 1e-9);
                }
            }
        }
    }
}
