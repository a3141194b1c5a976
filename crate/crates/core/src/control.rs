//! Lateral and longitudinal platoon controllers.
//!
//! Each law is a nominal tracking term plus a constructive barrier term. The
//! barrier is a damping feedback on the divergent flow `ḋ/d` of a safety
//! distance `d`: it is zero when the distance is not shrinking and grows
//! without bound as `d → 0⁺` while it is. [`ControllerMode::Baseline`] drops
//! the barrier terms and keeps the nominal ones.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::frenet::FrenetState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("barrier feedback undefined: {which} = {value} is not positive")]
    BarrierDomainError { which: DistanceKind, value: f64 },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
}

/// Controller gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    /// Lateral offset, 1/m².
    pub k1: f64,
    /// Lateral heading, 1/m.
    pub k2: f64,
    /// Lateral barrier.
    pub k3: f64,
    /// Longitudinal position, 1/s².
    pub k4: f64,
    /// Longitudinal velocity, 1/s.
    pub k5: f64,
    /// Longitudinal barrier, 1/s.
    pub k6: f64,
    /// Speed-constraint correction, 1/s.
    pub k_constraint: f64,
}

impl Gains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let named = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("k5", self.k5),
            ("k6", self.k6),
            ("k_constraint", self.k_constraint),
        ];
        for (name, value) in named {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ControlError::InvalidGains(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    /// Gap to the left road edge.
    EtaLeft,
    /// Gap to the right road edge.
    EtaRight,
    /// Gap to the predecessor's virtual vehicle.
    Rho,
}

impl DistanceKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::EtaLeft => "d_eta_L",
            Self::EtaRight => "d_eta_R",
            Self::Rho => "d_rho",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Safety distances of one vehicle. `d_rho` is `None` without a predecessor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyDistances {
    pub d_eta_l: f64,
    pub d_eta_r: f64,
    pub d_rho: Option<f64>,
}

impl SafetyDistances {
    /// `(kind, value)` for every distance that is defined.
    pub fn entries(&self) -> impl Iterator<Item = (DistanceKind, f64)> {
        [
            Some((DistanceKind::EtaLeft, self.d_eta_l)),
            Some((DistanceKind::EtaRight, self.d_eta_r)),
            self.d_rho.map(|d| (DistanceKind::Rho, d)),
        ]
        .into_iter()
        .flatten()
    }

    pub fn d_eta(&self) -> f64 {
        self.d_eta_l.min(self.d_eta_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ControllerMode {
    #[default]
    Safe,
    Baseline,
}

impl ControllerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Safe => "safe",
            Self::Baseline => "baseline",
        }
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "safe" => Ok(Self::Safe),
            "baseline" => Ok(Self::Baseline),
            other => Err(format!(
                "unknown mode {other:?} (expected safe or baseline)"
            )),
        }
    }
}

/// Road half-widths seen from a reference path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneWidths {
    pub w_left: f64,
    pub w_right: f64,
    pub eps_w: f64,
}

/// Margins to the left and right road edges at lateral offset `y_tilde`.
pub fn lateral_safety(widths: &LaneWidths, y_tilde: f64) -> (f64, f64) {
    (
        widths.w_left - y_tilde - widths.eps_w,
        widths.w_right + y_tilde - widths.eps_w,
    )
}

/// Gap between virtual vehicles minus the margin.
pub fn longitudinal_safety(e: f64, eps: f64) -> f64 {
    e - eps
}

/// `sin x / x`, continuous through zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `sign(v)` with `sign(0) = +1`.
pub fn motion_sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Nominal and barrier parts of a control command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub nominal: f64,
    pub barrier: f64,
}

impl Split {
    pub fn total(&self) -> f64 {
        self.nominal + self.barrier
    }
}

/// Input curvature, split into its nominal and barrier parts.
pub fn lateral_terms(
    fs: &FrenetState,
    v: f64,
    chi_r: f64,
    d: &SafetyDistances,
    gains: &Gains,
    mode: ControllerMode,
) -> Result<Split, ControlError> {
    let (y, th) = (fs.y_tilde, fs.theta_tilde);
    let sign = motion_sign(v);
    let nominal =
        -gains.k1 * sinc(th) * y - gains.k2 * sign * th + chi_r * th.cos() / (1.0 - chi_r * y);
    let barrier = match mode {
        ControllerMode::Baseline => 0.0,
        ControllerMode::Safe => {
            for (which, value) in [
                (DistanceKind::EtaLeft, d.d_eta_l),
                (DistanceKind::EtaRight, d.d_eta_r),
            ] {
                if !(value > 0.0) {
                    return Err(ControlError::BarrierDomainError { which, value });
                }
            }
            -gains.k3 * (1.0 / d.d_eta_l + 1.0 / d.d_eta_r) * sign * th.sin()
        }
    };
    Ok(Split { nominal, barrier })
}

pub fn lateral_control(
    fs: &FrenetState,
    v: f64,
    chi_r: f64,
    d: &SafetyDistances,
    gains: &Gains,
    mode: ControllerMode,
) -> Result<f64, ControlError> {
    lateral_terms(fs, v, chi_r, d, gains, mode).map(|s| s.total())
}

/// Virtual acceleration, split into its nominal and barrier parts.
///
/// `e_tilde` is the gap error, `nu` the relative virtual speed (predecessor
/// minus self), `d_rho_dot` the rate of the gap (equal to `nu`) and
/// `a_r_pred` the predecessor's virtual acceleration from the same tick.
pub fn longitudinal_terms(
    e_tilde: f64,
    nu: f64,
    d_rho: f64,
    d_rho_dot: f64,
    a_r_pred: f64,
    gains: &Gains,
    mode: ControllerMode,
) -> Result<Split, ControlError> {
    let nominal = gains.k4 * e_tilde + gains.k5 * nu + a_r_pred;
    let barrier = match mode {
        ControllerMode::Baseline => 0.0,
        ControllerMode::Safe => {
            if !(d_rho > 0.0) {
                return Err(ControlError::BarrierDomainError {
                    which: DistanceKind::Rho,
                    value: d_rho,
                });
            }
            gains.k6 * d_rho_dot / d_rho
        }
    };
    Ok(Split { nominal, barrier })
}

pub fn longitudinal_control(
    e_tilde: f64,
    nu: f64,
    d_rho: f64,
    d_rho_dot: f64,
    a_r_pred: f64,
    gains: &Gains,
    mode: ControllerMode,
) -> Result<f64, ControlError> {
    longitudinal_terms(e_tilde, nu, d_rho, d_rho_dot, a_r_pred, gains, mode).map(|s| s.total())
}

/// Ideal leader: on the path at constant speed.
pub fn leader_policy(t: f64, v_star: f64, s0: f64) -> FrenetState {
    FrenetState {
        s: s0 + v_star * t,
        y_tilde: 0.0,
        theta_tilde: 0.0,
        v_r: v_star,
    }
}
