//! Closed-loop platoon simulation.
//!
//! Every control tick the vehicles are processed in index order, leader
//! first, so each follower sees its predecessor's virtual acceleration from
//! the same tick. A follower's tick is: project onto its lane, evaluate the
//! safety distances, compute curvature and virtual acceleration, recover the
//! actual acceleration, then hold both inputs while the plant is integrated
//! in `dt_sim` RK4 substeps. With [`ControlHold::Tick`] the inputs are held
//! over the whole tick. With [`ControlHold::Continuous`] the control pass is
//! repeated at every RK4 stage, integrating the platoon and the virtual
//! speeds as one system; only the tick-time pass is logged.
//!
//! Each follower carries its own virtual speed `v_r`, integrated from the
//! virtual acceleration. The projection supplies the virtual arc length.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::control::{
    lateral_safety, lateral_terms, leader_policy, longitudinal_safety, longitudinal_terms,
    ControlError, ControllerMode, DistanceKind, Gains, SafetyDistances,
};
use crate::frenet::{
    constrained_velocity, recover_acceleration, to_frenet, FrenetError, FrenetState,
};
use crate::monitor::{lyapunov_lateral, lyapunov_longitudinal};
use crate::path::PathError;
use crate::road::RoadSpec;
use crate::vehicle::{
    derivatives, integrate_held, steering_angle, ControlInput, ModelError, StateRate, VehicleState,
};

/// Initial condition and geometry of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSetup {
    pub s: f64,
    pub y_tilde: f64,
    pub theta_tilde: f64,
    pub v: f64,
    pub wheelbase: f64,
    /// Index into [`PlatoonConfig::lanes`].
    pub lane: usize,
}

/// Scripted lane change into the platoon.
///
/// Until the merge fires, the merging vehicle has no predecessor and cruises
/// at constant virtual speed in its own lane, while the vehicle right behind
/// it in index order follows the vehicle right ahead of it with gap
/// `slot_gap`, holding a slot open. The merge fires at the first tick where
/// the merging vehicle's projection onto `target_lane` is less than
/// `trigger_gap` behind its predecessor. From then on the merging vehicle
/// tracks `target_lane` and the usual `i − 1` chain applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEvent {
    /// 1-based vehicle id.
    pub vehicle: usize,
    pub target_lane: usize,
    pub trigger_gap: f64,
    pub slot_gap: f64,
}

/// How long the control inputs are held constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ControlHold {
    /// Held over `dt_control`.
    #[default]
    Tick,
    /// Re-evaluated at every RK4 stage.
    Continuous,
}

impl ControlHold {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tick => "tick",
            Self::Continuous => "continuous",
        }
    }
}

impl fmt::Display for ControlHold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlHold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tick" => Ok(Self::Tick),
            "continuous" => Ok(Self::Continuous),
            other => Err(format!(
                "unknown hold {other:?} (expected tick or continuous)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonConfig {
    pub name: String,
    /// Lane 0 carries the platoon's reference path.
    pub lanes: Vec<RoadSpec>,
    pub vehicles: Vec<VehicleSetup>,
    pub gains: Gains,
    pub mode: ControllerMode,
    /// Desired gap between consecutive virtual vehicles.
    pub e_star: f64,
    pub v_star: f64,
    /// Longitudinal safety margin.
    pub eps: f64,
    /// Heading-basin margin for the initial-condition check.
    pub eps1: f64,
    /// Control tick and logging period.
    pub dt_control: f64,
    pub dt_sim: f64,
    pub hold: ControlHold,
    pub duration: f64,
    pub merge: Option<MergeEvent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        reason: reason.into(),
    }
}

impl PlatoonConfig {
    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    /// Substeps per control tick.
    pub fn substeps(&self) -> usize {
        (self.dt_control / self.dt_sim).round() as usize
    }

    /// Number of control ticks after t = 0.
    pub fn ticks(&self) -> usize {
        (self.duration / self.dt_control).round() as usize
    }

    /// Structural checks that hold regardless of controller mode. Gains are
    /// not checked here so that degenerate gain sets can still be simulated;
    /// the scenario loader rejects them.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lanes.is_empty() {
            return Err(invalid("lanes", "at least one lane is required"));
        }
        if self.vehicles.is_empty() {
            return Err(invalid("vehicle", "at least one vehicle is required"));
        }
        for (name, value) in [
            ("dt_control", self.dt_control),
            ("dt_sim", self.dt_sim),
            ("duration", self.duration),
            ("v_star", self.v_star),
            ("eps", self.eps),
            ("e_star", self.e_star),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        if !(self.eps1 > 0.0 && self.eps1 < FRAC_PI_2) {
            return Err(invalid(
                "eps1",
                format!("must lie in (0, pi/2), got {}", self.eps1),
            ));
        }
        let ratio = self.dt_control / self.dt_sim;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return Err(invalid(
                "dt_control",
                format!(
                    "must be an integer multiple of dt_sim ({} / {})",
                    self.dt_control, self.dt_sim
                ),
            ));
        }
        let ticks = self.duration / self.dt_control;
        if (ticks - ticks.round()).abs() > 1e-9 * ticks {
            return Err(invalid(
                "duration",
                "must be an integer multiple of dt_control",
            ));
        }
        let max_wheelbase = self
            .vehicles
            .iter()
            .map(|v| v.wheelbase)
            .fold(0.0, f64::max);
        if self.e_star <= max_wheelbase + self.eps {
            return Err(invalid(
                "e_star",
                format!(
                    "desired gap {} must exceed the largest wheelbase plus eps ({} + {}) (spacing assumption)",
                    self.e_star, max_wheelbase, self.eps
                ),
            ));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let field = format!("vehicle[{}]", i + 1);
            if !(v.wheelbase > 0.0) {
                return Err(invalid(field, "wheelbase must be positive"));
            }
            if v.lane >= self.lanes.len() {
                return Err(invalid(field, format!("lane {} does not exist", v.lane)));
            }
            if [v.s, v.y_tilde, v.theta_tilde, v.v]
                .iter()
                .any(|x| !x.is_finite())
            {
                return Err(invalid(field, "initial state must be finite"));
            }
            if v.lane != 0 && self.merge.is_none_or(|m| m.vehicle != i + 1) {
                return Err(invalid(
                    field,
                    "only the merging vehicle may start off the reference lane",
                ));
            }
        }
        if self.vehicles[0].lane != 0 {
            return Err(invalid("vehicle[1]", "the leader drives on lane 0"));
        }
        if let Some(m) = &self.merge {
            if m.vehicle < 2 || m.vehicle > self.vehicles.len() {
                return Err(invalid("merge.vehicle", "must name a follower"));
            }
            if m.target_lane >= self.lanes.len() {
                return Err(invalid("merge.target_lane", "lane does not exist"));
            }
            if !(m.trigger_gap > self.eps) {
                return Err(invalid("merge.trigger_gap", "must exceed eps"));
            }
            if !(m.slot_gap > 2.0 * self.eps) {
                return Err(invalid("merge.slot_gap", "must exceed twice eps"));
            }
        }
        // arc lengths strictly decrease along the chain
        let reference = &self.lanes[0].path;
        let chain: Vec<(usize, &VehicleSetup)> = self
            .vehicles
            .iter()
            .enumerate()
            .filter(|(i, _)| self.merge.is_none_or(|m| m.vehicle != i + 1))
            .collect();
        for pair in chain.windows(2) {
            let (_, ahead) = pair[0];
            let (j, behind) = pair[1];
            if reference.arc_difference(ahead.s, behind.s) <= 0.0 {
                return Err(invalid(
                    format!("vehicle[{}].s", j + 1),
                    "initial arc lengths must strictly decrease with vehicle index (ordering assumption)",
                ));
            }
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let road = &self.lanes[v.lane];
            let field = format!("vehicle[{}].s", i + 1);
            let pose = road
                .path
                .point_at(v.s)
                .map_err(|e| invalid(field.clone(), e.to_string()))?;
            if 1.0 - pose.curvature * v.y_tilde <= 0.0 {
                return Err(invalid(
                    format!("vehicle[{}].y_tilde", i + 1),
                    "outside the projection tube",
                ));
            }
            if v.theta_tilde.abs() >= FRAC_PI_2 {
                return Err(invalid(
                    format!("vehicle[{}].theta_tilde", i + 1),
                    "heading error must be below pi/2",
                ));
            }
        }
        Ok(())
    }
}

/// Error-channel thresholds used to declare convergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceThresholds {
    pub y_tilde: f64,
    pub theta_tilde: f64,
    pub v_tilde: f64,
    pub e_tilde: f64,
}

pub const CONVERGENCE: ConvergenceThresholds = ConvergenceThresholds {
    y_tilde: 0.1,
    theta_tilde: 0.02,
    v_tilde: 0.1,
    e_tilde: 0.2,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreachEvent {
    /// 1-based vehicle id.
    pub vehicle: usize,
    pub kind: DistanceKind,
    pub value: f64,
}

/// Everything recorded for one vehicle at one control tick. Inputs are the
/// ones applied over the following interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRecord {
    /// 1-based.
    pub id: usize,
    pub lane: usize,
    pub predecessor: Option<usize>,
    pub state: VehicleState,
    pub frenet: FrenetState,
    pub input: ControlInput,
    pub delta: f64,
    /// Virtual acceleration command.
    pub a_r: f64,
    pub v_tilde: f64,
    pub e_tilde: Option<f64>,
    pub nu: Option<f64>,
    pub distances: SafetyDistances,
    pub lyap_lat: f64,
    pub lyap_lon: Option<f64>,
    /// `v_r (1 − χʳ ỹ)/cos θ̃ − v`.
    pub constraint_residual: f64,
}

impl VehicleRecord {
    pub fn is_converged(&self, th: &ConvergenceThresholds) -> bool {
        self.frenet.y_tilde.abs() < th.y_tilde
            && self.frenet.theta_tilde.abs() < th.theta_tilde
            && self.v_tilde.abs() < th.v_tilde
            && self.e_tilde.is_none_or(|e| e.abs() < th.e_tilde)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub vehicles: Vec<VehicleRecord>,
    pub breach_events: Vec<BreachEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreachSummary {
    pub vehicle: usize,
    pub kind: DistanceKind,
    pub first_t: f64,
    pub min_value: f64,
    pub ticks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSummary {
    pub id: usize,
    pub min_d_eta_l: f64,
    pub min_d_eta_r: f64,
    pub min_d_rho: Option<f64>,
    pub max_abs_theta_tilde: f64,
    pub max_abs_chi: f64,
    pub max_abs_a: f64,
    /// Earliest tick time from which the vehicle stays within
    /// [`CONVERGENCE`] until the end of the log.
    pub convergence_time: Option<f64>,
}

impl VehicleSummary {
    pub fn min_d_eta(&self) -> f64 {
        self.min_d_eta_l.min(self.min_d_eta_r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub vehicles: Vec<VehicleSummary>,
    pub breaches: Vec<BreachSummary>,
    /// Time the scripted merge fired, if any.
    pub merge_time: Option<f64>,
}

impl Summary {
    pub fn from_records(records: &[StepRecord], merge_time: Option<f64>) -> Self {
        let n = records.first().map_or(0, |r| r.vehicles.len());
        let mut vehicles: Vec<VehicleSummary> = (0..n)
            .map(|i| VehicleSummary {
                id: i + 1,
                min_d_eta_l: f64::INFINITY,
                min_d_eta_r: f64::INFINITY,
                min_d_rho: None,
                max_abs_theta_tilde: 0.0,
                max_abs_chi: 0.0,
                max_abs_a: 0.0,
                convergence_time: None,
            })
            .collect();
        let mut breaches: Vec<BreachSummary> = Vec::new();
        for record in records {
            for (v, summary) in record.vehicles.iter().zip(vehicles.iter_mut()) {
                summary.min_d_eta_l = summary.min_d_eta_l.min(v.distances.d_eta_l);
                summary.min_d_eta_r = summary.min_d_eta_r.min(v.distances.d_eta_r);
                if let Some(d) = v.distances.d_rho {
                    summary.min_d_rho = Some(summary.min_d_rho.map_or(d, |m| m.min(d)));
                }
                summary.max_abs_theta_tilde =
                    summary.max_abs_theta_tilde.max(v.frenet.theta_tilde.abs());
                summary.max_abs_chi = summary.max_abs_chi.max(v.input.chi.abs());
                summary.max_abs_a = summary.max_abs_a.max(v.input.a.abs());
                if v.is_converged(&CONVERGENCE) {
                    summary.convergence_time.get_or_insert(record.t);
                } else {
                    summary.convergence_time = None;
                }
            }
            for event in &record.breach_events {
                match breaches
                    .iter_mut()
                    .find(|b| b.vehicle == event.vehicle && b.kind == event.kind)
                {
                    Some(b) => {
                        b.min_value = b.min_value.min(event.value);
                        b.ticks += 1;
                    }
                    None => breaches.push(BreachSummary {
                        vehicle: event.vehicle,
                        kind: event.kind,
                        first_t: record.t,
                        min_value: event.value,
                        ticks: 1,
                    }),
                }
            }
        }
        Self {
            vehicles,
            breaches,
            merge_time,
        }
    }

    pub fn has_breach(&self, vehicle: usize, kind: DistanceKind) -> bool {
        self.breaches
            .iter()
            .any(|b| b.vehicle == vehicle && b.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub config: PlatoonConfig,
    pub records: Vec<StepRecord>,
    pub summary: Summary,
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbortCause {
    #[error("safety breach: {kind} = {value}")]
    SafetyBreach { kind: DistanceKind, value: f64 },
    #[error(transparent)]
    Frenet(#[from] FrenetError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(#[from] ConfigError),
    #[error("precondition violated for vehicle {vehicle}: {reason}")]
    PreconditionViolation { vehicle: usize, reason: String },
    #[error("run aborted at t = {t:.2} s, vehicle {vehicle}: {cause}")]
    Aborted {
        t: f64,
        vehicle: usize,
        cause: AbortCause,
        /// Records of the ticks completed before the abort.
        partial: Box<SimLog>,
    },
}

struct Agent {
    state: VehicleState,
    v_r: f64,
    s_hint: f64,
    lane: usize,
    predecessor: Option<usize>,
    gap_target: f64,
    wheelbase: f64,
}

struct Abort {
    vehicle: usize,
    cause: AbortCause,
}

impl Abort {
    fn new(vehicle: usize, cause: impl Into<AbortCause>) -> Self {
        Self {
            vehicle,
            cause: cause.into(),
        }
    }
}

/// Runs the closed loop described by `config`.
pub fn run_simulation(config: &PlatoonConfig) -> Result<SimLog, SimError> {
    config.validate()?;
    let mut agents = initial_agents(config)?;
    if config.mode == ControllerMode::Safe {
        check_safe_start(config, &agents)?;
    }

    let ticks = config.ticks();
    let substeps = config.substeps();
    let leader_s0 = config.vehicles[0].s;
    let mut records = Vec::with_capacity(ticks + 1);
    let mut merge_pending = config.merge;
    let mut merge_time = None;

    for tick in 0..=ticks {
        let t = tick as f64 * config.dt_control;
        let step = (|| -> Result<StepRecord, Abort> {
            if let Some(m) = merge_pending {
                if try_merge(config, &mut agents, &m).map_err(|e| Abort::new(m.vehicle, e))? {
                    merge_pending = None;
                    merge_time = Some(t);
                    log::info!("merge of vehicle {} fired at t = {t:.2} s", m.vehicle);
                }
            }
            let record = control_tick(config, &mut agents, t, leader_s0)?;
            if tick < ticks {
                match config.hold {
                    ControlHold::Tick => advance(config, &mut agents, &record.vehicles, substeps)?,
                    ControlHold::Continuous => {
                        for k in 0..substeps {
                            let tk = t + k as f64 * config.dt_sim;
                            continuous_step(config, &mut agents, tk, leader_s0)?;
                        }
                    }
                }
            }
            Ok(record)
        })();
        match step {
            Ok(record) => records.push(record),
            Err(abort) => {
                let partial = SimLog {
                    config: config.clone(),
                    summary: Summary::from_records(&records, merge_time),
                    records,
                };
                return Err(SimError::Aborted {
                    t,
                    vehicle: abort.vehicle,
                    cause: abort.cause,
                    partial: Box::new(partial),
                });
            }
        }
    }
    let summary = Summary::from_records(&records, merge_time);
    Ok(SimLog {
        config: config.clone(),
        records,
        summary,
    })
}

/// Integrates the followers over `n` substeps with the inputs of `records`
/// held constant.
fn advance(
    config: &PlatoonConfig,
    agents: &mut [Agent],
    records: &[VehicleRecord],
    n: usize,
) -> Result<(), Abort> {
    let dt = config.dt_sim * n as f64;
    for (agent, vr) in agents.iter_mut().zip(records).skip(1) {
        agent.state = integrate_held(&agent.state, &vr.input, config.dt_sim, n)
            .map_err(|e| Abort::new(vr.id, e))?;
        agent.v_r += vr.a_r * dt;
        agent.s_hint = vr.frenet.s;
    }
    Ok(())
}

type FollowerState = (VehicleState, f64);

/// Rates of every follower's state and virtual speed with the control pass
/// evaluated at `stage`, and the followers' arc lengths there.
fn stage_rates(
    config: &PlatoonConfig,
    agents: &mut [Agent],
    t: f64,
    leader_s0: f64,
    stage: &[FollowerState],
) -> Result<(Vec<(StateRate, f64)>, Vec<f64>), Abort> {
    for (agent, &(state, v_r)) in agents.iter_mut().skip(1).zip(stage) {
        agent.state = state;
        agent.v_r = v_r;
    }
    let record = control_tick(config, agents, t, leader_s0)?;
    let followers = &record.vehicles[1..];
    Ok((
        followers
            .iter()
            .map(|vr| (derivatives(&vr.state, &vr.input), vr.a_r))
            .collect(),
        followers.iter().map(|vr| vr.frenet.s).collect(),
    ))
}

/// One RK4 step of `dt_sim` for the whole platoon with the control laws
/// evaluated at every stage.
fn continuous_step(
    config: &PlatoonConfig,
    agents: &mut [Agent],
    t: f64,
    leader_s0: f64,
) -> Result<(), Abort> {
    let h = config.dt_sim;
    let base: Vec<FollowerState> = agents[1..].iter().map(|a| (a.state, a.v_r)).collect();
    let shift = |k: &[(StateRate, f64)], scale: f64| -> Vec<FollowerState> {
        base.iter()
            .zip(k)
            .map(|(&(s, v_r), (r, a_r))| {
                let state = VehicleState {
                    x: s.x + scale * r.x_dot,
                    y: s.y + scale * r.y_dot,
                    theta: s.theta + scale * r.theta_dot,
                    v: s.v + scale * r.v_dot,
                };
                (state, v_r + scale * a_r)
            })
            .collect()
    };
    let (k1, s_start) = stage_rates(config, agents, t, leader_s0, &base)?;
    let (k2, _) = stage_rates(config, agents, t + 0.5 * h, leader_s0, &shift(&k1, 0.5 * h))?;
    let (k3, _) = stage_rates(config, agents, t + 0.5 * h, leader_s0, &shift(&k2, 0.5 * h))?;
    let (k4, _) = stage_rates(config, agents, t + h, leader_s0, &shift(&k3, h))?;
    let w = h / 6.0;
    for (i, agent) in agents.iter_mut().enumerate().skip(1) {
        let (s, v_r) = base[i - 1];
        let r = [&k1[i - 1], &k2[i - 1], &k3[i - 1], &k4[i - 1]];
        let mix =
            |f: fn(&(StateRate, f64)) -> f64| f(r[0]) + 2.0 * f(r[1]) + 2.0 * f(r[2]) + f(r[3]);
        agent.state = VehicleState {
            x: s.x + w * mix(|k| k.0.x_dot),
            y: s.y + w * mix(|k| k.0.y_dot),
            theta: crate::path::wrap_angle(s.theta + w * mix(|k| k.0.theta_dot)),
            v: s.v + w * mix(|k| k.0.v_dot),
        };
        agent.v_r = v_r + w * mix(|k| k.1);
        agent.s_hint = s_start[i - 1];
    }
    Ok(())
}

fn initial_agents(config: &PlatoonConfig) -> Result<Vec<Agent>, SimError> {
    let merging = config.merge.map(|m| m.vehicle);
    config
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, setup)| {
            let road = &config.lanes[setup.lane];
            let pose = road.path.point_at(setup.s).map_err(|e| {
                SimError::InvalidConfig(invalid(format!("vehicle[{}].s", i + 1), e.to_string()))
            })?;
            let [x, y] = pose.offset(setup.y_tilde);
            let theta = crate::path::wrap_angle(pose.heading + setup.theta_tilde);
            let scale = 1.0 - pose.curvature * setup.y_tilde;
            let (predecessor, gap_target) = match (i, merging) {
                (0, _) => (None, config.e_star),
                (i, Some(m)) if i + 1 == m => (None, config.e_star),
                (i, Some(m)) if i == m => (
                    Some(i - 2),
                    config.merge.map_or(config.e_star, |m| m.slot_gap),
                ),
                (i, _) => (Some(i - 1), config.e_star),
            };
            Ok(Agent {
                state: VehicleState {
                    x,
                    y,
                    theta,
                    v: setup.v,
                },
                v_r: setup.v * setup.theta_tilde.cos() / scale,
                s_hint: setup.s,
                lane: setup.lane,
                predecessor,
                gap_target,
                wheelbase: setup.wheelbase,
            })
        })
        .collect()
}

fn check_safe_start(config: &PlatoonConfig, agents: &[Agent]) -> Result<(), SimError> {
    let basin = (FRAC_PI_2 - config.eps1).powi(2);
    for (i, (agent, setup)) in agents.iter().zip(&config.vehicles).enumerate().skip(1) {
        let vehicle = i + 1;
        let road = &config.lanes[agent.lane];
        let (l, r) = lateral_safety(&road.widths, setup.y_tilde);
        let mut distances = vec![("d_eta_L", l), ("d_eta_R", r)];
        if let Some(p) = agent.predecessor {
            let e = road.path.arc_difference(config.vehicles[p].s, setup.s);
            distances.push(("d_rho", longitudinal_safety(e, config.eps)));
        }
        if let Some((name, value)) = distances.iter().find(|(_, d)| !(*d > 0.0)) {
            return Err(SimError::PreconditionViolation {
                vehicle,
                reason: format!("initial {name} = {value} is not positive"),
            });
        }
        let energy = config.gains.k1 * setup.y_tilde.powi(2) + setup.theta_tilde.powi(2);
        if energy >= basin {
            return Err(SimError::PreconditionViolation {
                vehicle,
                reason: format!(
                    "k1*y^2 + theta^2 = {energy} is not below (pi/2 - eps1)^2 = {basin}"
                ),
            });
        }
    }
    Ok(())
}

fn try_merge(
    config: &PlatoonConfig,
    agents: &mut [Agent],
    m: &MergeEvent,
) -> Result<bool, AbortCause> {
    let idx = m.vehicle - 1;
    let pred = idx - 1;
    let target = &config.lanes[m.target_lane].path;
    let pos = [agents[idx].state.x, agents[idx].state.y];
    let projection = target.project(pos, None)?;
    let pred_s = agents[pred].s_hint;
    let gap = target.arc_difference(pred_s, projection.s);
    if !(gap > 0.0 && gap < m.trigger_gap) {
        return Ok(false);
    }
    let fs = to_frenet(target, &agents[idx].state, Some(projection.s))?;
    let agent = &mut agents[idx];
    agent.lane = m.target_lane;
    agent.predecessor = Some(pred);
    agent.gap_target = config.e_star;
    agent.s_hint = fs.s;
    agent.v_r = fs.v_r;
    if let Some(next) = agents.get_mut(idx + 1) {
        next.predecessor = Some(idx);
        next.gap_target = config.e_star;
    }
    Ok(true)
}

fn control_tick(
    config: &PlatoonConfig,
    agents: &mut [Agent],
    t: f64,
    leader_s0: f64,
) -> Result<StepRecord, Abort> {
    let mut out: Vec<VehicleRecord> = Vec::with_capacity(agents.len());
    let mut breach_events = Vec::new();

    // leader: ideal motion on the reference lane
    {
        let road = &config.lanes[0];
        let ideal = leader_policy(t, config.v_star, leader_s0);
        let s = road
            .path
            .normalize_s(ideal.s)
            .map_err(|e| Abort::new(1, e))?;
        let pose = road.path.point_at(s).map_err(|e| Abort::new(1, e))?;
        let state = VehicleState {
            x: pose.position[0],
            y: pose.position[1],
            theta: pose.heading,
            v: config.v_star,
        };
        let leader = &mut agents[0];
        leader.state = state;
        leader.v_r = config.v_star;
        leader.s_hint = s;
        let (l, r) = lateral_safety(&road.widths, 0.0);
        let input = ControlInput {
            a: 0.0,
            chi: pose.curvature,
        };
        out.push(VehicleRecord {
            id: 1,
            lane: 0,
            predecessor: None,
            state,
            frenet: FrenetState { s, ..ideal },
            input,
            delta: steering_angle(input.chi, leader.wheelbase, None)
                .map_err(|e| Abort::new(1, e))?,
            a_r: 0.0,
            v_tilde: 0.0,
            e_tilde: None,
            nu: None,
            distances: SafetyDistances {
                d_eta_l: l,
                d_eta_r: r,
                d_rho: None,
            },
            lyap_lat: 0.0,
            lyap_lon: None,
            constraint_residual: 0.0,
        });
    }

    for i in 1..agents.len() {
        let id = i + 1;
        let agent = &agents[i];
        let road = &config.lanes[agent.lane];
        let path = &road.path;
        let projected =
            to_frenet(path, &agent.state, Some(agent.s_hint)).map_err(|e| Abort::new(id, e))?;
        let fs = FrenetState {
            v_r: agent.v_r,
            ..projected
        };
        let pose = path.point_at(fs.s).map_err(|e| Abort::new(id, e))?;
        let (chi_r, chi_r_rate) = (pose.curvature, pose.curvature_rate);
        let (d_eta_l, d_eta_r) = lateral_safety(&road.widths, fs.y_tilde);

        let longitudinal = agent.predecessor.map(|p| {
            let ahead = &out[p];
            let e = path.arc_difference(ahead.frenet.s, fs.s);
            let nu = ahead.frenet.v_r - fs.v_r;
            (
                e - agent.gap_target,
                nu,
                longitudinal_safety(e, config.eps),
                ahead.a_r,
            )
        });
        let distances = SafetyDistances {
            d_eta_l,
            d_eta_r,
            d_rho: longitudinal.map(|(_, _, d, _)| d),
        };
        for (kind, value) in distances.entries() {
            if value <= 0.0 {
                if config.mode == ControllerMode::Safe {
                    return Err(Abort::new(id, AbortCause::SafetyBreach { kind, value }));
                }
                breach_events.push(BreachEvent {
                    vehicle: id,
                    kind,
                    value,
                });
            }
        }

        let v = agent.state.v;
        let chi = lateral_terms(&fs, v, chi_r, &distances, &config.gains, config.mode)
            .map_err(|e| Abort::new(id, e))?
            .total();
        let a_r = match longitudinal {
            Some((e_tilde, nu, d_rho, a_pred)) => {
                longitudinal_terms(e_tilde, nu, d_rho, nu, a_pred, &config.gains, config.mode)
                    .map_err(|e| Abort::new(id, e))?
                    .total()
            }
            None => 0.0,
        };
        let a = recover_acceleration(
            &fs,
            v,
            a_r,
            chi,
            chi_r,
            chi_r_rate,
            config.gains.k_constraint,
        )
        .map_err(|e| Abort::new(id, e))?;
        let target_speed = constrained_velocity(&fs, chi_r).map_err(|e| Abort::new(id, e))?;
        let input = ControlInput { a, chi };
        out.push(VehicleRecord {
            id,
            lane: agent.lane,
            predecessor: agent.predecessor.map(|p| p + 1),
            state: agent.state,
            frenet: fs,
            input,
            delta: steering_angle(chi, agent.wheelbase, None).map_err(|e| Abort::new(id, e))?,
            a_r,
            v_tilde: v - config.v_star,
            e_tilde: longitudinal.map(|(e, ..)| e),
            nu: longitudinal.map(|(_, nu, ..)| nu),
            distances,
            lyap_lat: lyapunov_lateral(fs.y_tilde, fs.theta_tilde, config.gains.k1),
            lyap_lon: longitudinal.map(|(e, nu, ..)| lyapunov_longitudinal(e, nu, config.gains.k4)),
            constraint_residual: target_speed - v,
        });
    }

    Ok(StepRecord {
        t,
        vehicles: out,
        breach_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::LaneWidths;
    use crate::road::PathSource;

    pub(crate) fn straight_config(vehicles: Vec<VehicleSetup>) -> PlatoonConfig {
        let road = RoadSpec::new(
            PathSource::Straight {
                length: 1500.0,
                start: [0.0, 0.0],
                heading: 0.0,
            },
            LaneWidths {
                w_left: 10.0,
                w_right: 10.0,
                eps_w: 1.2,
            },
        )
        .unwrap();
        PlatoonConfig {
            name: "test".into(),
            lanes: vec![road],
            vehicles,
            gains: Gains {
                k1: 0.01,
                k2: 0.1,
                k3: 0.1,
                k4: 0.4,
                k5: 0.1,
                k6: 2.0,
                k_constraint: 1.0,
            },
            mode: ControllerMode::Safe,
            e_star: 14.0,
            v_star: 10.0,
            eps: 5.0,
            eps1: 0.01,
            dt_control: 0.1,
            dt_sim: 0.01,
            hold: ControlHold::Tick,
            duration: 60.0,
            merge: None,
        }
    }

    fn on_path(s: f64) -> VehicleSetup {
        VehicleSetup {
            s,
            y_tilde: 0.0,
            theta_tilde: 0.0,
            v: 10.0,
            wheelbase: 4.0,
            lane: 0,
        }
    }

    #[test]
    fn equilibrium_is_invariant() {
        let config = straight_config(vec![on_path(50.0), on_path(36.0)]);
        let log = run_simulation(&config).unwrap();
        assert_eq!(log.records.len(), 601);
        for record in &log.records {
            let f = &record.vehicles[1];
            assert!(f.frenet.y_tilde.abs() < 1e-9);
            assert!(f.frenet.theta_tilde.abs() < 1e-9);
            assert!(f.v_tilde.abs() < 1e-9);
            assert!(f.e_tilde.unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn equilibrium_is_invariant_under_continuous_control() {
        let mut config = straight_config(vec![on_path(50.0), on_path(36.0)]);
        config.hold = ControlHold::Continuous;
        config.duration = 10.0;
        let log = run_simulation(&config).unwrap();
        for record in &log.records {
            let f = &record.vehicles[1];
            assert!(f.frenet.y_tilde.abs() < 1e-9 && f.e_tilde.unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn continuous_control_tracks_the_speed_constraint() {
        // a held input lets the constraint residual drift during a lateral
        // manoeuvre; re-evaluating at every stage keeps it near zero
        let mut f = on_path(36.0);
        f.y_tilde = 4.0;
        f.v = 13.0;
        let mut config = straight_config(vec![on_path(50.0), f]);
        config.duration = 10.0;
        let worst = |config: &PlatoonConfig| {
            run_simulation(config)
                .unwrap()
                .records
                .iter()
                .map(|r| r.vehicles[1].constraint_residual.abs())
                .fold(0.0, f64::max)
        };
        let held = worst(&config);
        config.hold = ControlHold::Continuous;
        let continuous = worst(&config);
        assert!(continuous < 1e-6, "{continuous}");
        assert!(held > 100.0 * continuous, "{held} vs {continuous}");
    }

    #[test]
    fn rejects_bad_ordering_and_spacing() {
        let config = straight_config(vec![on_path(50.0), on_path(60.0)]);
        let err = run_simulation(&config).unwrap_err();
        assert!(
            matches!(err, SimError::InvalidConfig(ref e) if e.reason.contains("ordering assumption"))
        );
        let mut config = straight_config(vec![on_path(50.0), on_path(36.0)]);
        config.e_star = 8.0;
        let err = run_simulation(&config).unwrap_err();
        assert!(matches!(err, SimError::InvalidConfig(ref e) if e.field == "e_star"));
    }

    #[test]
    fn safe_mode_rejects_unsafe_start() {
        let config = straight_config(vec![on_path(50.0), on_path(46.0)]);
        assert!(matches!(
            run_simulation(&config),
            Err(SimError::PreconditionViolation { vehicle: 2, .. })
        ));
        let mut baseline = config.clone();
        baseline.mode = ControllerMode::Baseline;
        let log = run_simulation(&baseline).unwrap();
        assert!(log.summary.has_breach(2, DistanceKind::Rho));
    }

    #[test]
    fn summary_minima_match_records() {
        let mut f = on_path(38.0);
        f.y_tilde = 3.0;
        f.v = 12.0;
        let config = straight_config(vec![on_path(50.0), f]);
        let log = run_simulation(&config).unwrap();
        let min_rho = log
            .records
            .iter()
            .map(|r| r.vehicles[1].distances.d_rho.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(log.summary.vehicles[1].min_d_rho, Some(min_rho));
        let min_l = log
            .records
            .iter()
            .map(|r| r.vehicles[1].distances.d_eta_l)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(log.summary.vehicles[1].min_d_eta_l, min_l);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut f = on_path(40.0);
        f.y_tilde = -2.0;
        f.theta_tilde = 0.1;
        let config = straight_config(vec![on_path(50.0), f, on_path(20.0)]);
        assert_eq!(
            run_simulation(&config).unwrap(),
            run_simulation(&config).unwrap()
        );
    }
}
