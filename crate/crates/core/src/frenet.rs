//! Path-relative (Frenet-like) coordinates of a vehicle and the virtual
//! vehicle that rides on its projection.
//!
//! The virtual vehicle moves along the path with arc length `s` and speed
//! `v_r`. Its speed and the actual speed are tied by
//! `v = v_r (1 − χʳ ỹ) / cos θ̃`; [`recover_acceleration`] turns a virtual
//! acceleration command into the actual one while pulling the pair back onto
//! that constraint.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::path::{wrap_angle, PathError, ReferencePath};
use crate::vehicle::VehicleState;

/// Largest admissible |θ̃|. Closer to π/2 the speed constraint degenerates.
pub const HEADING_LIMIT: f64 = FRAC_PI_2 - 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrenetError {
    #[error("lateral offset {y_tilde} m leaves the projection tube (curvature {curvature})")]
    TubeViolation { y_tilde: f64, curvature: f64 },
    #[error("heading error {theta_tilde} rad outside (-pi/2, pi/2)")]
    HeadingDomainViolation { theta_tilde: f64 },
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrenetState {
    /// Arc length of the projection (the virtual vehicle's position).
    pub s: f64,
    /// Signed lateral offset, positive to the left of the path.
    pub y_tilde: f64,
    /// Heading error `θ − θʳ(s)`.
    pub theta_tilde: f64,
    /// Virtual vehicle speed.
    pub v_r: f64,
}

fn check_tube(y_tilde: f64, chi_r: f64) -> Result<f64, FrenetError> {
    let scale = 1.0 - chi_r * y_tilde;
    if scale > 0.0 {
        Ok(scale)
    } else {
        Err(FrenetError::TubeViolation {
            y_tilde,
            curvature: chi_r,
        })
    }
}

fn check_heading(theta_tilde: f64) -> Result<f64, FrenetError> {
    if theta_tilde.abs() < HEADING_LIMIT {
        Ok(theta_tilde.cos())
    } else {
        Err(FrenetError::HeadingDomainViolation { theta_tilde })
    }
}

/// Projects `state` onto `path` and fills in the virtual speed implied by the
/// current motion, `v cos θ̃ / (1 − χʳ ỹ)`.
pub fn to_frenet(
    path: &ReferencePath,
    state: &VehicleState,
    s_hint: Option<f64>,
) -> Result<FrenetState, FrenetError> {
    let projection = match path.project([state.x, state.y], s_hint) {
        Ok(p) => p,
        Err(PathError::ProjectionAmbiguous { .. }) => {
            let chi = s_hint
                .and_then(|s| path.point_at(s).ok())
                .map_or(0.0, |pose| pose.curvature);
            return Err(FrenetError::TubeViolation {
                y_tilde: f64::NAN,
                curvature: chi,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let pose = path.point_at(projection.s)?;
    let theta_tilde = wrap_angle(state.theta - pose.heading);
    let scale = check_tube(projection.y_tilde, pose.curvature)?;
    let cos = check_heading(theta_tilde)?;
    Ok(FrenetState {
        s: projection.s,
        y_tilde: projection.y_tilde,
        theta_tilde,
        v_r: state.v * cos / scale,
    })
}

/// Rebuilds the world-frame state from path coordinates and an actual speed.
pub fn from_frenet(
    path: &ReferencePath,
    s: f64,
    y_tilde: f64,
    theta_tilde: f64,
    v: f64,
) -> Result<VehicleState, PathError> {
    let pose = path.point_at(s)?;
    let [x, y] = pose.offset(y_tilde);
    Ok(VehicleState {
        x,
        y,
        theta: wrap_angle(pose.heading + theta_tilde),
        v,
    })
}

/// Rates of the lateral offset and heading error under speed `v` and input
/// curvature `chi`.
pub fn error_dynamics(
    fs: &FrenetState,
    v: f64,
    chi: f64,
    chi_r: f64,
) -> Result<(f64, f64), FrenetError> {
    let scale = check_tube(fs.y_tilde, chi_r)?;
    let y_rate = v * fs.theta_tilde.sin();
    let theta_rate = v * (chi - chi_r * fs.theta_tilde.cos() / scale);
    Ok((y_rate, theta_rate))
}

/// Actual speed implied by the virtual speed, `v_r (1 − χʳ ỹ) / cos θ̃`.
pub fn constrained_velocity(fs: &FrenetState, chi_r: f64) -> Result<f64, FrenetError> {
    let cos = check_heading(fs.theta_tilde)?;
    Ok(fs.v_r * (1.0 - chi_r * fs.y_tilde) / cos)
}

/// Actual acceleration realising the virtual acceleration `a_r`.
///
/// The first part is the time derivative of [`constrained_velocity`] along
/// the closed loop. The correction `k (v_c − v)` makes the residual
/// `v_c − v` decay like `e^{−k t}` when the derivative part is exact.
pub fn recover_acceleration(
    fs: &FrenetState,
    v: f64,
    a_r: f64,
    chi: f64,
    chi_r: f64,
    chi_r_rate: f64,
    k: f64,
) -> Result<f64, FrenetError> {
    let cos = check_heading(fs.theta_tilde)?;
    let scale = check_tube(fs.y_tilde, chi_r)?;
    let (y_rate, theta_rate) = error_dynamics(fs, v, chi, chi_r)?;
    // chain rule: dχʳ/dt = χʳ'(s) ṡ with ṡ = v_r
    let chi_r_dot = chi_r_rate * fs.v_r;
    let tracking = (a_r * scale + v * fs.theta_tilde.sin() * theta_rate
        - fs.v_r * (chi_r_dot * fs.y_tilde + chi_r * y_rate))
        / cos;
    let target = fs.v_r * scale / cos;
    Ok(tracking + k * (target - v))
}
