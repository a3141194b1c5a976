//! Python bindings for `platoon-core`.
//!
//! Scenarios load from the bundled set or a TOML file, run in Rust and come
//! back as column dictionaries. The control laws and monitors are exposed as
//! plain functions for interactive use.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use platoon_core::check as criteria;
use platoon_core::control::{self, DistanceKind};
use platoon_core::monitor;
use platoon_core::output::{self, CSV_HEADER};
use platoon_core::scenario::{self, ScenarioError};
use platoon_core::{
    frenet, ControlHold, ControllerMode, FrenetState, LaneWidths, PlatoonConfig, ReferencePath,
    SafetyDistances, SimError, SimLog, VehicleState,
};

create_exception!(
    platoon,
    ScenarioInvalid,
    PyValueError,
    "Malformed or invalid scenario."
);
create_exception!(
    platoon,
    SimulationAborted,
    PyRuntimeError,
    "Run stopped early; args are (message, t, vehicle, partial Run)."
);

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario_error(e: ScenarioError) -> PyErr {
    ScenarioInvalid::new_err(e.to_string())
}

/// Reference path parametrized by arc length.
#[pyclass(name = "Path", module = "platoon", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPath {
    inner: ReferencePath,
}

#[pymethods]
impl PyPath {
    #[staticmethod]
    #[pyo3(signature = (length, start = (0.0, 0.0), heading = 0.0))]
    fn straight(length: f64, start: (f64, f64), heading: f64) -> PyResult<Self> {
        let inner =
            ReferencePath::straight([start.0, start.1], heading, length).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (radius, center = (0.0, 0.0), start_angle = 0.0))]
    fn circle(radius: f64, center: (f64, f64), start_angle: f64) -> PyResult<Self> {
        let inner = ReferencePath::circle([center.0, center.1], radius, start_angle)
            .map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Cubic spline through the points, re-parametrized by arc length.
    #[staticmethod]
    #[pyo3(signature = (points, closed = false))]
    fn waypoints(points: Vec<(f64, f64)>, closed: bool) -> PyResult<Self> {
        let pts: Vec<[f64; 2]> = points.into_iter().map(|(x, y)| [x, y]).collect();
        let inner = ReferencePath::from_waypoints(&pts, closed).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.total_length()
    }

    #[getter]
    fn closed(&self) -> bool {
        self.inner.is_closed()
    }

    /// `(x, y, heading, curvature, curvature_rate)` at arc length `s`.
    fn point_at(&self, s: f64) -> PyResult<(f64, f64, f64, f64, f64)> {
        let p = self.inner.point_at(s).map_err(value_error)?;
        Ok((
            p.position[0],
            p.position[1],
            p.heading,
            p.curvature,
            p.curvature_rate,
        ))
    }

    /// `(s, y_tilde)` of the orthogonal projection of `(x, y)`.
    #[pyo3(signature = (x, y, hint = None))]
    fn project(&self, x: f64, y: f64, hint: Option<f64>) -> PyResult<(f64, f64)> {
        let p = self.inner.project([x, y], hint).map_err(value_error)?;
        Ok((p.s, p.y_tilde))
    }

    /// Signed arc length from `behind` to `ahead`.
    fn arc_difference(&self, ahead: f64, behind: f64) -> f64 {
        self.inner.arc_difference(ahead, behind)
    }

    fn __repr__(&self) -> String {
        format!(
            "Path(length={:.3}, closed={})",
            self.inner.total_length(),
            self.inner.is_closed()
        )
    }
}

/// Gains of the lateral and longitudinal laws.
#[pyclass(
    name = "Gains",
    module = "platoon",
    get_all,
    set_all,
    skip_from_py_object
)]
#[derive(Clone, Copy)]
struct PyGains {
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
    k5: f64,
    k6: f64,
    k_constraint: f64,
}

impl From<&PyGains> for control::Gains {
    fn from(g: &PyGains) -> Self {
        Self {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            k4: g.k4,
            k5: g.k5,
            k6: g.k6,
            k_constraint: g.k_constraint,
        }
    }
}

impl From<control::Gains> for PyGains {
    fn from(g: control::Gains) -> Self {
        Self {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            k4: g.k4,
            k5: g.k5,
            k6: g.k6,
            k_constraint: g.k_constraint,
        }
    }
}

#[pymethods]
impl PyGains {
    #[new]
    #[pyo3(signature = (k1, k2, k3, k4, k5, k6, k_constraint = 1.0))]
    fn new(k1: f64, k2: f64, k3: f64, k4: f64, k5: f64, k6: f64, k_constraint: f64) -> Self {
        Self {
            k1,
            k2,
            k3,
            k4,
            k5,
            k6,
            k_constraint,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Gains(k1={}, k2={}, k3={}, k4={}, k5={}, k6={}, k_constraint={})",
            self.k1, self.k2, self.k3, self.k4, self.k5, self.k6, self.k_constraint
        )
    }
}

fn parse_mode(mode: &str) -> PyResult<ControllerMode> {
    mode.parse().map_err(PyValueError::new_err)
}

/// A validated scenario.
#[pyclass(name = "Scenario", module = "platoon", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    config: PlatoonConfig,
}

#[pymethods]
impl PyScenario {
    /// Bundled scenario name or path to a TOML file.
    #[staticmethod]
    fn load(name_or_path: &str) -> PyResult<Self> {
        let config = scenario::resolve_scenario(name_or_path).map_err(scenario_error)?;
        Ok(Self { config })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let config = scenario::parse_scenario(text).map_err(scenario_error)?;
        Ok(Self { config })
    }

    #[staticmethod]
    fn bundled() -> Vec<&'static str> {
        scenario::BUNDLED.iter().map(|(name, _)| *name).collect()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.config.name
    }

    #[setter]
    fn set_name(&mut self, name: String) {
        self.config.name = name;
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.config.mode.as_str()
    }

    #[setter]
    fn set_mode(&mut self, mode: &str) -> PyResult<()> {
        self.config.mode = parse_mode(mode)?;
        Ok(())
    }

    #[getter]
    fn hold(&self) -> &'static str {
        self.config.hold.as_str()
    }

    #[setter]
    fn set_hold(&mut self, hold: &str) -> PyResult<()> {
        self.config.hold = hold.parse::<ControlHold>().map_err(PyValueError::new_err)?;
        Ok(())
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.config.duration
    }

    #[setter]
    fn set_duration(&mut self, duration: f64) {
        self.config.duration = duration;
    }

    #[getter]
    fn gains(&self) -> PyGains {
        self.config.gains.into()
    }

    #[setter]
    fn set_gains(&mut self, gains: PyRef<'_, PyGains>) {
        self.config.gains = (&*gains).into();
    }

    #[getter]
    fn n_vehicles(&self) -> usize {
        self.config.n_vehicles()
    }

    /// Reference path of a lane; lane 0 carries the platoon.
    #[pyo3(signature = (lane = 0))]
    fn path(&self, lane: usize) -> PyResult<PyPath> {
        let road = self
            .config
            .lanes
            .get(lane)
            .ok_or_else(|| PyValueError::new_err(format!("no lane {lane}")))?;
        Ok(PyPath {
            inner: road.path.clone(),
        })
    }

    fn to_toml(&self) -> String {
        scenario::to_scenario_string(&self.config)
    }

    /// Simulates the scenario. Raises `SimulationAborted` on an early stop.
    fn run(&self, py: Python<'_>) -> PyResult<PyRun> {
        let config = self.config.clone();
        match py.detach(move || platoon_core::run_simulation(&config)) {
            Ok(log) => Ok(PyRun { log }),
            Err(SimError::Aborted {
                t,
                vehicle,
                cause,
                partial,
            }) => {
                let message = format!("run aborted at t = {t:.2} s, vehicle {vehicle}: {cause}");
                let partial = Py::new(py, PyRun { log: *partial })?;
                Err(SimulationAborted::new_err((message, t, vehicle, partial)))
            }
            Err(e) => Err(value_error(e)),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, mode={}, vehicles={}, duration={})",
            self.config.name,
            self.config.mode,
            self.config.n_vehicles(),
            self.config.duration
        )
    }
}

/// Log of a finished (or partial) run.
#[pyclass(name = "Run", module = "platoon", frozen)]
struct PyRun {
    log: SimLog,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn name(&self) -> &str {
        &self.log.config.name
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.log.config.mode.as_str()
    }

    #[getter]
    fn merge_time(&self) -> Option<f64> {
        self.log.summary.merge_time
    }

    fn __len__(&self) -> usize {
        self.log.records.len()
    }

    /// One list per CSV column, one entry per tick and vehicle. Undefined
    /// values are NaN.
    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); CSV_HEADER.len()];
        for record in &self.log.records {
            for v in &record.vehicles {
                for (col, x) in cols.iter_mut().zip(output::row_values(record, v)) {
                    col.push(x);
                }
            }
        }
        let dict = PyDict::new(py);
        for (name, col) in CSV_HEADER.iter().zip(cols) {
            match *name {
                "vehicle_id" | "breach_flag" => {
                    dict.set_item(name, col.into_iter().map(|x| x as u64).collect::<Vec<_>>())?
                }
                _ => dict.set_item(name, col)?,
            }
        }
        Ok(dict)
    }

    /// Per-vehicle minima, maxima and convergence times.
    fn summary(&self) -> Vec<HashMap<&'static str, Option<f64>>> {
        self.log
            .summary
            .vehicles
            .iter()
            .map(|v| {
                HashMap::from([
                    ("id", Some(v.id as f64)),
                    ("min_d_eta_l", Some(v.min_d_eta_l)),
                    ("min_d_eta_r", Some(v.min_d_eta_r)),
                    ("min_d_rho", v.min_d_rho),
                    ("max_abs_theta_tilde", Some(v.max_abs_theta_tilde)),
                    ("max_abs_chi", Some(v.max_abs_chi)),
                    ("max_abs_a", Some(v.max_abs_a)),
                    ("convergence_time", v.convergence_time),
                ])
            })
            .collect()
    }

    /// `(vehicle, kind, first_t, min_value, ticks)` per breached distance.
    fn breaches(&self) -> Vec<(usize, &'static str, f64, f64, usize)> {
        self.log
            .summary
            .breaches
            .iter()
            .map(|b| (b.vehicle, b.kind.label(), b.first_t, b.min_value, b.ticks))
            .collect()
    }

    fn has_breach(&self, vehicle: usize, kind: &str) -> PyResult<bool> {
        let kind = [
            DistanceKind::EtaLeft,
            DistanceKind::EtaRight,
            DistanceKind::Rho,
        ]
        .into_iter()
        .find(|k| k.label() == kind)
        .ok_or_else(|| PyValueError::new_err(format!("unknown distance {kind:?}")))?;
        Ok(self.log.summary.has_breach(vehicle, kind))
    }

    fn csv(&self) -> PyResult<String> {
        let mut bytes = Vec::new();
        output::write_csv(&self.log.records, &mut bytes)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Writes the CSV log and plots; returns the file names.
    #[pyo3(signature = (dir, stem = None))]
    fn write(&self, dir: PathBuf, stem: Option<String>) -> PyResult<Vec<String>> {
        let stem =
            stem.unwrap_or_else(|| format!("{}_{}", self.log.config.name, self.log.config.mode));
        output::write_run(&self.log, &dir, &stem)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn table(&self) -> String {
        output::summary_table(&[(self.log.config.mode.as_str(), &self.log.summary)])
    }

    fn __repr__(&self) -> String {
        format!(
            "Run(name={:?}, mode={}, ticks={}, breaches={})",
            self.log.config.name,
            self.log.config.mode,
            self.log.records.len(),
            self.log.summary.breaches.len()
        )
    }
}

/// `(s, y_tilde, theta_tilde, v_r)` of a world pose.
#[pyfunction]
#[pyo3(signature = (path, x, y, theta, v, hint = None))]
fn to_frenet(
    path: &PyPath,
    x: f64,
    y: f64,
    theta: f64,
    v: f64,
    hint: Option<f64>,
) -> PyResult<(f64, f64, f64, f64)> {
    let state = VehicleState { x, y, theta, v };
    let fs = frenet::to_frenet(&path.inner, &state, hint).map_err(value_error)?;
    Ok((fs.s, fs.y_tilde, fs.theta_tilde, fs.v_r))
}

/// `(x, y, theta)` of a path-relative pose.
#[pyfunction]
fn from_frenet(path: &PyPath, s: f64, y_tilde: f64, theta_tilde: f64) -> PyResult<(f64, f64, f64)> {
    let state =
        frenet::from_frenet(&path.inner, s, y_tilde, theta_tilde, 0.0).map_err(value_error)?;
    Ok((state.x, state.y, state.theta))
}

/// `(d_eta_left, d_eta_right)` for a lateral offset.
#[pyfunction]
#[pyo3(signature = (y_tilde, w_left, w_right, eps_w))]
fn lateral_safety(y_tilde: f64, w_left: f64, w_right: f64, eps_w: f64) -> (f64, f64) {
    control::lateral_safety(
        &LaneWidths {
            w_left,
            w_right,
            eps_w,
        },
        y_tilde,
    )
}

/// `(nominal, barrier)` parts of the input curvature.
#[pyfunction]
#[pyo3(signature = (gains, y_tilde, theta_tilde, v, curvature, d_eta_left, d_eta_right, mode = "safe"))]
#[allow(clippy::too_many_arguments)]
fn lateral_control(
    gains: &PyGains,
    y_tilde: f64,
    theta_tilde: f64,
    v: f64,
    curvature: f64,
    d_eta_left: f64,
    d_eta_right: f64,
    mode: &str,
) -> PyResult<(f64, f64)> {
    let fs = FrenetState {
        s: 0.0,
        y_tilde,
        theta_tilde,
        v_r: 0.0,
    };
    let d = SafetyDistances {
        d_eta_l: d_eta_left,
        d_eta_r: d_eta_right,
        d_rho: None,
    };
    let split = control::lateral_terms(&fs, v, curvature, &d, &gains.into(), parse_mode(mode)?)
        .map_err(value_error)?;
    Ok((split.nominal, split.barrier))
}

/// `(nominal, barrier)` parts of the virtual acceleration.
#[pyfunction]
#[pyo3(signature = (gains, e_tilde, nu, d_rho, a_r_pred = 0.0, mode = "safe"))]
fn longitudinal_control(
    gains: &PyGains,
    e_tilde: f64,
    nu: f64,
    d_rho: f64,
    a_r_pred: f64,
    mode: &str,
) -> PyResult<(f64, f64)> {
    let split = control::longitudinal_terms(
        e_tilde,
        nu,
        d_rho,
        nu,
        a_r_pred,
        &gains.into(),
        parse_mode(mode)?,
    )
    .map_err(value_error)?;
    Ok((split.nominal, split.barrier))
}

#[pyfunction]
fn lyapunov_lateral(y_tilde: f64, theta_tilde: f64, k1: f64) -> f64 {
    monitor::lyapunov_lateral(y_tilde, theta_tilde, k1)
}

#[pyfunction]
fn lyapunov_longitudinal(e_tilde: f64, nu: f64, k4: f64) -> f64 {
    monitor::lyapunov_longitudinal(e_tilde, nu, k4)
}

/// Integrates the closed-loop barrier ODE with a constant disturbance.
/// Returns `(min_d, t_end, final_flow)`.
#[pyfunction]
#[pyo3(signature = (k_o, d0, phi0, duration, alpha = 0.0))]
fn barrier_ode(k_o: f64, d0: f64, phi0: f64, duration: f64, alpha: f64) -> (f64, f64, f64) {
    let trace = monitor::barrier_ode_check(k_o, |_| alpha, d0, phi0, duration);
    (trace.min_d, trace.t_end, trace.final_flow())
}

/// Runs the acceptance criteria: `(id, title, passed, detail)` each.
#[pyfunction]
fn check(py: Python<'_>) -> Vec<(&'static str, &'static str, bool, String)> {
    py.detach(criteria::run_all)
        .into_iter()
        .map(|(c, o)| (c.id, c.title, o.passed, o.detail))
        .collect()
}

#[pymodule]
fn platoon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPath>()?;
    m.add_class::<PyGains>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRun>()?;
    m.add("ScenarioError", m.py().get_type::<ScenarioInvalid>())?;
    m.add("SimulationAborted", m.py().get_type::<SimulationAborted>())?;
    m.add("CSV_COLUMNS", CSV_HEADER.to_vec())?;
    m.add_function(wrap_pyfunction!(to_frenet, m)?)?;
    m.add_function(wrap_pyfunction!(from_frenet, m)?)?;
    m.add_function(wrap_pyfunction!(lateral_safety, m)?)?;
    m.add_function(wrap_pyfunction!(lateral_control, m)?)?;
    m.add_function(wrap_pyfunction!(longitudinal_control, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_lateral, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_longitudinal, m)?)?;
    m.add_function(wrap_pyfunction!(barrier_ode, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
