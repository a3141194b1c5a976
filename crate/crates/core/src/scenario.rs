//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys hold the platoon
//! parameters; `[gains]`, `[road]` and `[[vehicle]]` are required tables,
//! `[[lane]]` and `[merge]` are optional. Unknown keys are rejected. See the
//! bundled files in `scenarios/` and the README for the full grammar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControllerMode, Gains, LaneWidths};
use crate::road::{PathSource, RoadSpec};
use crate::sim::{ControlHold, MergeEvent, PlatoonConfig, VehicleSetup};

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("scenario_A", include_str!("../scenarios/scenario_A.toml")),
    ("scenario_B", include_str!("../scenarios/scenario_B.toml")),
    ("scenario_C", include_str!("../scenarios/scenario_C.toml")),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
}

fn validation(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

fn default_dt_control() -> f64 {
    0.1
}

fn default_dt_sim() -> f64 {
    0.01
}

fn default_eps1() -> f64 {
    0.01
}

fn default_k_constraint() -> f64 {
    1.0
}

fn default_hold() -> String {
    ControlHold::Tick.as_str().to_owned()
}

fn default_mode() -> String {
    ControllerMode::Safe.as_str().to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default = "default_mode")]
    mode: String,
    duration: f64,
    #[serde(default = "default_dt_control")]
    dt_control: f64,
    #[serde(default = "default_dt_sim")]
    dt_sim: f64,
    #[serde(default = "default_hold")]
    hold: String,
    e_star: f64,
    v_star: f64,
    eps: f64,
    #[serde(default = "default_eps1")]
    eps1: f64,
    gains: GainsTable,
    road: RoadTable,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    lane: Vec<RoadTable>,
    vehicle: Vec<VehicleTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merge: Option<MergeTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsTable {
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
    k5: f64,
    k6: f64,
    #[serde(default = "default_k_constraint")]
    k_constraint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadTable {
    w_left: f64,
    w_right: f64,
    eps_w: f64,
    path: PathSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleTable {
    s: f64,
    y_tilde: f64,
    theta_tilde: f64,
    v: f64,
    wheelbase: f64,
    #[serde(default)]
    lane: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MergeTable {
    vehicle: usize,
    target_lane: usize,
    trigger_gap: f64,
    slot_gap: f64,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn build_road(table: &RoadTable, field: &str) -> Result<RoadSpec, ScenarioError> {
    RoadSpec::new(
        table.path.clone(),
        LaneWidths {
            w_left: table.w_left,
            w_right: table.w_right,
            eps_w: table.eps_w,
        },
    )
    .map_err(|e| validation(field, e.to_string()))
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<PlatoonConfig, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.span().map_or(1, |span| line_of(text, span.start)),
        message: e.message().to_owned(),
    })?;
    let mode: ControllerMode = file
        .mode
        .parse()
        .map_err(|e: String| validation("mode", e))?;
    let hold: ControlHold = file
        .hold
        .parse()
        .map_err(|e: String| validation("hold", e))?;
    let gains = Gains {
        k1: file.gains.k1,
        k2: file.gains.k2,
        k3: file.gains.k3,
        k4: file.gains.k4,
        k5: file.gains.k5,
        k6: file.gains.k6,
        k_constraint: file.gains.k_constraint,
    };
    gains
        .validate()
        .map_err(|e| validation("gains", e.to_string()))?;
    let mut lanes = vec![build_road(&file.road, "road")?];
    for (i, lane) in file.lane.iter().enumerate() {
        lanes.push(build_road(lane, &format!("lane[{}]", i + 1))?);
    }
    let config = PlatoonConfig {
        name: file.name,
        lanes,
        vehicles: file
            .vehicle
            .iter()
            .map(|v| VehicleSetup {
                s: v.s,
                y_tilde: v.y_tilde,
                theta_tilde: v.theta_tilde,
                v: v.v,
                wheelbase: v.wheelbase,
                lane: v.lane,
            })
            .collect(),
        gains,
        mode,
        e_star: file.e_star,
        v_star: file.v_star,
        eps: file.eps,
        eps1: file.eps1,
        dt_control: file.dt_control,
        dt_sim: file.dt_sim,
        hold,
        duration: file.duration,
        merge: file.merge.map(|m| MergeEvent {
            vehicle: m.vehicle,
            target_lane: m.target_lane,
            trigger_gap: m.trigger_gap,
            slot_gap: m.slot_gap,
        }),
    };
    config
        .validate()
        .map_err(|e| validation(e.field, e.reason))?;
    Ok(config)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<PlatoonConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

/// Text of a bundled scenario.
pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Loads a bundled scenario by name, or a file otherwise.
pub fn resolve_scenario(name_or_path: &str) -> Result<PlatoonConfig, ScenarioError> {
    match bundled_text(name_or_path) {
        Some(text) => parse_scenario(text),
        None => load_scenario(Path::new(name_or_path)),
    }
}

fn road_table(road: &RoadSpec) -> RoadTable {
    RoadTable {
        w_left: road.widths.w_left,
        w_right: road.widths.w_right,
        eps_w: road.widths.eps_w,
        path: road.source.clone(),
    }
}

/// Renders `config` as a scenario document that parses back to it.
pub fn to_scenario_string(config: &PlatoonConfig) -> String {
    let file = ScenarioFile {
        name: config.name.clone(),
        mode: config.mode.as_str().to_owned(),
        duration: config.duration,
        dt_control: config.dt_control,
        dt_sim: config.dt_sim,
        hold: config.hold.as_str().to_owned(),
        e_star: config.e_star,
        v_star: config.v_star,
        eps: config.eps,
        eps1: config.eps1,
        gains: GainsTable {
            k1: config.gains.k1,
            k2: config.gains.k2,
            k3: config.gains.k3,
            k4: config.gains.k4,
            k5: config.gains.k5,
            k6: config.gains.k6,
            k_constraint: config.gains.k_constraint,
        },
        road: road_table(&config.lanes[0]),
        lane: config.lanes[1..].iter().map(road_table).collect(),
        vehicle: config
            .vehicles
            .iter()
            .map(|v| VehicleTable {
                s: v.s,
                y_tilde: v.y_tilde,
                theta_tilde: v.theta_tilde,
                v: v.v,
                wheelbase: v.wheelbase,
                lane: v.lane,
            })
            .collect(),
        merge: config.merge.map(|m| MergeTable {
            vehicle: m.vehicle,
            target_lane: m.target_lane,
            trigger_gap: m.trigger_gap,
            slot_gap: m.slot_gap,
        }),
    };
    toml::to_string(&file).expect("scenario tables always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
duration = 10.0
e_star = 14.0
v_star = 10.0
eps = 5.0

[gains]
k1 = 0.01
k2 = 0.1
k3 = 0.1
k4 = 0.4
k5 = 0.1
k6 = 2.0

[road]
w_left = 10.0
w_right = 10.0
eps_w = 1.2
path = { kind = "straight", length = 500.0 }

[[vehicle]]
s = 50.0
y_tilde = 0.0
theta_tilde = 0.0
v = 10.0
wheelbase = 4.0

[[vehicle]]
s = 36.0
y_tilde = 0.0
theta_tilde = 0.0
v = 10.0
wheelbase = 4.0
"#;

    #[test]
    fn defaults_are_applied() {
        let config = parse_scenario(MINIMAL).unwrap();
        assert_eq!(config.dt_control, 0.1);
        assert_eq!(config.dt_sim, 0.01);
        assert_eq!(config.eps1, 0.01);
        assert_eq!(config.gains.k_constraint, 1.0);
        assert_eq!(config.mode, ControllerMode::Safe);
        assert_eq!(config.hold, ControlHold::Tick);
        assert_eq!(config.n_vehicles(), 2);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = MINIMAL.replace("eps_w = 1.2", "eps_w = 1.2\nwidth = 3.0");
        match parse_scenario(&text) {
            Err(ScenarioError::Parse { line, message }) => {
                let expected = text.lines().position(|l| l.starts_with("width")).unwrap() + 1;
                assert_eq!(line, expected);
                assert!(message.contains("width"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_its_line() {
        let text = MINIMAL.replace("v_star = 10.0", "v_star = = 10.0");
        match parse_scenario(&text) {
            Err(ScenarioError::Parse { line, .. }) => {
                let expected = text.lines().position(|l| l.starts_with("v_star")).unwrap() + 1;
                assert_eq!(line, expected);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spacing_violation_is_a_validation_error() {
        let text = MINIMAL.replace("e_star = 14.0", "e_star = 8.0");
        match parse_scenario(&text) {
            Err(ScenarioError::Validation { field, reason }) => {
                assert_eq!(field, "e_star");
                assert!(reason.contains("spacing assumption"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_gain_and_unknown_choices() {
        let text = MINIMAL.replace("k3 = 0.1", "k3 = 0.0");
        assert!(
            matches!(parse_scenario(&text), Err(ScenarioError::Validation { field, .. }) if field == "gains")
        );
        let text = MINIMAL.replace("name = \"minimal\"", "name = \"minimal\"\nmode = \"fast\"");
        assert!(
            matches!(parse_scenario(&text), Err(ScenarioError::Validation { field, .. }) if field == "mode")
        );
        let text = MINIMAL.replace(
            "name = \"minimal\"",
            "name = \"minimal\"\nhold = \"sometimes\"",
        );
        assert!(
            matches!(parse_scenario(&text), Err(ScenarioError::Validation { field, .. }) if field == "hold")
        );
    }

    #[test]
    fn round_trip_is_exact() {
        for (name, text) in BUNDLED {
            let config = parse_scenario(text).unwrap();
            let again = parse_scenario(&to_scenario_string(&config)).unwrap();
            assert_eq!(config, again, "{name}");
        }
        let config = parse_scenario(MINIMAL).unwrap();
        assert_eq!(
            parse_scenario(&to_scenario_string(&config)).unwrap(),
            config
        );
    }

    #[test]
    fn bundled_tables_match_published_initial_states() {
        let a = resolve_scenario("scenario_A").unwrap();
        let field = |c: &PlatoonConfig, f: fn(&VehicleSetup) -> f64| {
            c.vehicles.iter().map(f).collect::<Vec<_>>()
        };
        assert_eq!(field(&a, |v| v.s), [50.0, 42.0, 36.0, 28.0, 22.0]);
        assert_eq!(field(&a, |v| v.y_tilde), [0.0, 4.0, 0.0, -4.0, 0.0]);
        assert_eq!(field(&a, |v| v.v), [10.0, 13.0, 10.0, 16.0, 10.0]);
        let b = resolve_scenario("scenario_B").unwrap();
        assert_eq!(field(&b, |v| v.s), [50.0, 40.0, 29.0, 22.0, 12.0]);
        assert_eq!(field(&b, |v| v.y_tilde), [0.0, -10.0, -2.5, -12.0, -5.0]);
        assert_eq!(field(&b, |v| v.v), [10.0, 12.0, 10.0, 12.0, 10.0]);
        for c in [&a, &b] {
            assert!(c
                .vehicles
                .iter()
                .all(|v| v.theta_tilde == 0.0 && v.wheelbase == 4.0));
        }
    }
}
