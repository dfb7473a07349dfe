//! PID with integral anti-windup and output clamping. Derivative acts on the
//! error and is zeroed on the first step to avoid a startup kick.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub out_min: f64,
    pub out_max: f64,
}

impl PidGains {
    /// Gains with unbounded integral and output.
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            i_min: f64::NEG_INFINITY,
            i_max: f64::INFINITY,
            out_min: f64::NEG_INFINITY,
            out_max: f64::INFINITY,
        }
    }

    pub fn with_output_limits(mut self, lo: f64, hi: f64) -> Self {
        self.out_min = lo;
        self.out_max = hi;
        self
    }

    pub fn with_integral_limits(mut self, lo: f64, hi: f64) -> Self {
        self.i_min = lo;
        self.i_max = hi;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
    /// Steps rejected for non-finite input.
    pub fault_count: u64,
}

impl PidState {
    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }
}

/// One controller update. A non-finite error or non-positive dt produces
/// output 0 and leaves the controller state untouched apart from the fault
/// counter.
pub fn pid_step(state: &mut PidState, gains: &PidGains, error: f64, dt: f64) -> f64 {
    if !error.is_finite() || !dt.is_finite() || dt <= 0.0 {
        state.fault_count += 1;
        return 0.0;
    }
    state.integral = (state.integral + error * dt).clamp(gains.i_min, gains.i_max);
    let derivative = match state.prev_error {
        Some(prev) => (error - prev) / dt,
        None => 0.0,
    };
    state.prev_error = Some(error);
    (gains.kp * error + gains.ki * state.integral + gains.kd * derivative)
        .clamp(gains.out_min, gains.out_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pure_proportional() {
        let mut s = PidState::default();
        let out = pid_step(&mut s, &PidGains::new(2.0, 0.0, 0.0), 0.5, 0.01);
        assert_relative_eq!(out, 1.0);
    }

    #[test]
    fn equilibrium_is_silent() {
        let mut s = PidState::default();
        let out = pid_step(&mut s, &PidGains::new(3.0, 1.0, 1.0), 0.0, 0.01);
        assert_relative_eq!(out, 0.0);
    }

    #[test]
    fn first_step_has_no_derivative_kick() {
        let gains = PidGains::new(0.0, 0.0, 10.0);
        let mut s = PidState::default();
        assert_relative_eq!(pid_step(&mut s, &gains, 5.0, 0.01), 0.0);
        // Second step sees the error change.
        assert_relative_eq!(
            pid_step(&mut s, &gains, 5.1, 0.01),
            10.0 * 0.1 / 0.01,
            epsilon = 1e-9
        );
    }

    #[test]
    fn non_finite_error_faults_and_preserves_state() {
        let gains = PidGains::new(1.0, 1.0, 0.0);
        let mut s = PidState::default();
        pid_step(&mut s, &gains, 1.0, 0.1);
        let before = s.clone();
        assert_eq!(pid_step(&mut s, &gains, f64::NAN, 0.1), 0.0);
        assert_eq!(s.fault_count, before.fault_count + 1);
        assert_eq!(s.integral, before.integral);
        assert_eq!(s.prev_error, before.prev_error);
        assert_eq!(pid_step(&mut s, &gains, 1.0, 0.0), 0.0);
        assert_eq!(s.fault_count, before.fault_count + 2);
    }

    #[test]
    fn integral_saturates_at_bounds() {
        let gains = PidGains::new(0.0, 1.0, 0.0).with_integral_limits(-0.5, 0.5);
        let mut s = PidState::default();
        for _ in 0..1000 {
            pid_step(&mut s, &gains, 10.0, 0.1);
        }
        assert_relative_eq!(s.integral, 0.5);
        for _ in 0..2000 {
            pid_step(&mut s, &gains, -10.0, 0.1);
        }
        assert_relative_eq!(s.integral, -0.5);
    }

    proptest! {
        #[test]
        fn integral_and_output_always_within_bounds(
            errors in proptest::collection::vec(-100.0f64..100.0, 1..200),
        ) {
            let gains = PidGains::new(1.5, 2.0, 0.3)
                .with_integral_limits(-1.0, 1.0)
                .with_output_limits(-5.0, 5.0);
            let mut s = PidState::default();
            for e in errors {
                let out = pid_step(&mut s, &gains, e, 0.01);
                prop_assert!((-1.0..=1.0).contains(&s.integral));
                prop_assert!((-5.0..=5.0).contains(&out));
            }
        }

        #[test]
        fn proportional_output_is_linear_in_kp(
            kp in 0.1f64..10.0,
            c in 0.1f64..10.0,
            e in -50.0f64..50.0,
        ) {
            let mut s1 = PidState::default();
            let mut s2 = PidState::default();
            let base = pid_step(&mut s1, &PidGains::new(kp, 0.0, 0.0), e, 0.01);
            let scaled = pid_step(&mut s2, &PidGains::new(c * kp, 0.0, 0.0), e, 0.01);
            prop_assert!((scaled - c * base).abs() <= 1e-9 * base.abs().max(1.0) * c.max(1.0));
        }
    }
}
