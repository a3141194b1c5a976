//! Second-order kinematic bicycle model and its fixed-step integration.

use thiserror::Error;

use crate::path::wrap_angle;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("steering angle {delta} rad exceeds limit {limit} rad")]
    SteeringSaturated { delta: f64, limit: f64 },
}

/// World-frame pose and speed of the rear-axle reference point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Heading in (−π, π].
    pub theta: f64,
    pub v: f64,
}

/// Acceleration and input curvature (`tan δ / L`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub a: f64,
    pub chi: f64,
}

/// Time derivative of a [`VehicleState`], ordered `(ẋ, ẏ, v̇, θ̇)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub x_dot: f64,
    pub y_dot: f64,
    pub v_dot: f64,
    pub theta_dot: f64,
}

pub fn derivatives(state: &VehicleState, input: &ControlInput) -> StateRate {
    StateRate {
        x_dot: state.v * state.theta.cos(),
        y_dot: state.v * state.theta.sin(),
        v_dot: input.a,
        theta_dot: state.v * input.chi,
    }
}

/// One classical RK4 step with the input held constant over `dt`.
pub fn integrate_step(
    state: &VehicleState,
    input: &ControlInput,
    dt: f64,
) -> Result<VehicleState, ModelError> {
    if !(dt > 0.0) {
        return Err(ModelError::NonPositiveDt(dt));
    }
    let advance = |base: &VehicleState, rate: &StateRate, h: f64| VehicleState {
        x: base.x + h * rate.x_dot,
        y: base.y + h * rate.y_dot,
        theta: base.theta + h * rate.theta_dot,
        v: base.v + h * rate.v_dot,
    };
    let k1 = derivatives(state, input);
    let k2 = derivatives(&advance(state, &k1, 0.5 * dt), input);
    let k3 = derivatives(&advance(state, &k2, 0.5 * dt), input);
    let k4 = derivatives(&advance(state, &k3, dt), input);
    let w = dt / 6.0;
    Ok(VehicleState {
        x: state.x + w * (k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot),
        y: state.y + w * (k1.y_dot + 2.0 * k2.y_dot + 2.0 * k3.y_dot + k4.y_dot),
        theta: wrap_angle(
            state.theta
                + w * (k1.theta_dot + 2.0 * k2.theta_dot + 2.0 * k3.theta_dot + k4.theta_dot),
        ),
        v: state.v + w * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot),
    })
}

/// Advances `state` by `steps` RK4 substeps of `dt` under a held input.
pub fn integrate_held(
    state: &VehicleState,
    input: &ControlInput,
    dt: f64,
    steps: usize,
) -> Result<VehicleState, ModelError> {
    let mut current = *state;
    for _ in 0..steps {
        current = integrate_step(&current, input, dt)?;
    }
    Ok(current)
}

/// Front-wheel steering angle producing curvature `chi` on a vehicle with
/// the given wheelbase. With a limit, angles beyond it are reported rather
/// than clipped.
pub fn steering_angle(chi: f64, wheelbase: f64, limit: Option<f64>) -> Result<f64, ModelError> {
    let delta = (chi * wheelbase).atan();
    match limit {
        Some(limit) if delta.abs() > limit => Err(ModelError::SteeringSaturated { delta, limit }),
        _ => Ok(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn state(v: f64, theta: f64) -> VehicleState {
        VehicleState {
            x: 0.0,
            y: 0.0,
            theta,
            v,
        }
    }

    #[test]
    fn derivative_examples() {
        let r = derivatives(&state(10.0, 0.0), &ControlInput { a: 0.0, chi: 0.0 });
        assert_eq!(
            (r.x_dot, r.y_dot, r.v_dot, r.theta_dot),
            (10.0, 0.0, 0.0, 0.0)
        );
        let r = derivatives(&state(2.0, FRAC_PI_2), &ControlInput { a: 1.0, chi: 0.0 });
        assert!(r.x_dot.abs() < 1e-15);
        assert_eq!((r.y_dot, r.v_dot, r.theta_dot), (2.0, 1.0, 0.0));
        let r = derivatives(&state(10.0, 0.0), &ControlInput { a: 0.0, chi: 0.02 });
        assert!((r.theta_dot - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_speed_step() {
        let next = integrate_step(&state(10.0, 0.0), &ControlInput::default(), 0.1).unwrap();
        assert_eq!(next.x, 1.0);
        assert_eq!(next.y, 0.0);
    }

    #[test]
    fn constant_acceleration_matches_closed_form() {
        let next =
            integrate_step(&state(10.0, 0.0), &ControlInput { a: 2.0, chi: 0.0 }, 0.1).unwrap();
        assert!((next.v - 10.2).abs() < 1e-12);
        // x = v0 t + a t² / 2
        assert!((next.x - 1.01).abs() < 1e-9);
    }

    #[test]
    fn full_circle_closes() {
        let input = ControlInput { a: 0.0, chi: 0.05 };
        let dt = 0.01;
        let period = 2.0 * PI / (10.0 * 0.05);
        let steps = (period / dt).floor() as usize;
        let start = state(10.0, 0.0);
        let mut s = integrate_held(&start, &input, dt, steps).unwrap();
        s = integrate_step(&s, &input, period - steps as f64 * dt).unwrap();
        assert!((s.x - start.x).hypot(s.y - start.y) < 1e-4);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        let err = integrate_step(&state(1.0, 0.0), &ControlInput::default(), 0.0);
        assert_eq!(err, Err(ModelError::NonPositiveDt(0.0)));
        assert!(integrate_step(&state(1.0, 0.0), &ControlInput::default(), -0.1).is_err());
    }

    #[test]
    fn rk4_is_fourth_order() {
        let input = ControlInput { a: 0.7, chi: 0.03 };
        let start = state(5.0, 0.3);
        let run = |dt: f64| {
            let steps = (2.0 / dt).round() as usize;
            integrate_held(&start, &input, dt, steps).unwrap()
        };
        let reference = run(1e-5);
        let err = |s: VehicleState| (s.x - reference.x).hypot(s.y - reference.y);
        let ratio = err(run(0.1)) / err(run(0.05));
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn steering_examples() {
        assert_eq!(steering_angle(0.0, 4.0, None).unwrap(), 0.0);
        let d = steering_angle(0.3f64.tan() / 4.0, 4.0, None).unwrap();
        assert!((d - 0.3).abs() < 1e-15);
        let d = steering_angle(0.62556, 0.324, None).unwrap();
        assert!((d - 0.2).abs() < 1e-4);
        assert!(matches!(
            steering_angle(1.0, 4.0, Some(0.5)),
            Err(ModelError::SteeringSaturated { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn straight_motion_keeps_heading(a in -5.0f64..5.0, v in 0.0f64..20.0, theta in -3.0f64..3.0) {
            let next = integrate_step(&state(v, theta), &ControlInput { a, chi: 0.0 }, 0.01).unwrap();
            proptest::prop_assert_eq!(next.theta, theta);
        }

        #[test]
        fn speed_ignores_curvature(a in -5.0f64..5.0, chi in -0.5f64..0.5) {
            let base = integrate_step(&state(8.0, 0.1), &ControlInput { a, chi: 0.0 }, 0.01).unwrap();
            let turned = integrate_step(&state(8.0, 0.1), &ControlInput { a, chi }, 0.01).unwrap();
            proptest::prop_assert_eq!(base.v, turned.v);
        }
    }
}
