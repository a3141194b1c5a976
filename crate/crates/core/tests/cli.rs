use std::path::Path;
use std::process::{Command, Output};

use platoon_core::output::CSV_HEADER;

const TWO_VEHICLES: &str = r#"
name = "pair"
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

fn platoon(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn platoon")
}

fn scenario_file(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    text.lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn run_creates_the_output_dir_and_writes_every_tick() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nested").join("out");
    let result = platoon(&["run", "scenario_A", "--mode", "safe"], &out);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let rows = read_csv(&out.join("scenario_A_safe.csv"));
    assert_eq!(rows[0], CSV_HEADER);
    assert_eq!(rows.len() - 1, 5 * (600 + 1));
    for plot in ["errors", "safety", "inputs", "trajectory"] {
        let svg = std::fs::read_to_string(out.join(format!("scenario_A_safe_{plot}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("min d_rho"));
}

#[test]
fn baseline_run_flags_vehicle_four() {
    let tmp = tempfile::tempdir().unwrap();
    let result = platoon(&["run", "scenario_A", "--mode", "baseline"], tmp.path());
    assert!(result.status.success());
    let rows = read_csv(&tmp.path().join("scenario_A_baseline.csv"));
    let id = CSV_HEADER.iter().position(|c| *c == "vehicle_id").unwrap();
    let flag = CSV_HEADER.iter().position(|c| *c == "breach_flag").unwrap();
    let rho = CSV_HEADER.iter().position(|c| *c == "d_rho").unwrap();
    let flagged: Vec<_> = rows[1..]
        .iter()
        .filter(|r| r[id] == "4" && r[flag] == "1")
        .collect();
    assert!(!flagged.is_empty());
    assert!(flagged
        .iter()
        .any(|r| r[rho].parse::<f64>().unwrap() <= 0.0));
}

#[test]
fn compare_at_equilibrium_gives_identical_logs() {
    let tmp = tempfile::tempdir().unwrap();
    // binary-exact steps and speeds keep every state exactly at equilibrium;
    // decimal ones leave roundoff in the gap that the barrier term sees
    let text = TWO_VEHICLES
        .replace(
            "eps = 5.0",
            "eps = 5.0\ndt_control = 0.125\ndt_sim = 0.015625",
        )
        .replace("v_star = 10.0", "v_star = 8.0")
        .replace("v = 10.0", "v = 8.0");
    let file = scenario_file(tmp.path(), &text);
    let out = tmp.path().join("out");
    let result = platoon(&["compare", &file], &out);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let safe = std::fs::read(out.join("pair_safe.csv")).unwrap();
    let baseline = std::fs::read(out.join("pair_baseline.csv")).unwrap();
    assert!(safe == baseline, "safe and baseline CSV differ");
    assert!(out.join("pair_compare.svg").exists());
    let summary = std::fs::read_to_string(out.join("pair_summary.txt")).unwrap();
    assert!(summary.contains("safe") && summary.contains("baseline"));
}

#[test]
fn spacing_violation_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let file = scenario_file(
        tmp.path(),
        &TWO_VEHICLES.replace("e_star = 14.0", "e_star = 8.0"),
    );
    let result = platoon(&["run", &file], &tmp.path().join("out"));
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(
        stderr.contains("e_star") && stderr.contains("spacing assumption"),
        "{stderr}"
    );
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let file = scenario_file(
        tmp.path(),
        &TWO_VEHICLES.replace("eps = 5.0", "eps = 5.0\nspeed = 3.0"),
    );
    let result = platoon(&["run", &file], &tmp.path().join("out"));
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("line 7"), "{stderr}");
}

#[test]
fn coarse_control_abort_prints_the_record_and_keeps_partial_output() {
    // a 1 s hold lets the follower close the gap between two control ticks
    let text = TWO_VEHICLES
        .replace("eps = 5.0", "eps = 5.0\ndt_control = 1.0")
        .replace(
            "s = 36.0\ny_tilde = 0.0\ntheta_tilde = 0.0\nv = 10.0",
            "s = 44.0\ny_tilde = 0.0\ntheta_tilde = 0.0\nv = 30.0",
        );
    let tmp = tempfile::tempdir().unwrap();
    let file = scenario_file(tmp.path(), &text);
    let out = tmp.path().join("out");
    let result = platoon(&["run", &file], &out);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(
        stderr.contains("aborted") && stderr.contains("d_rho"),
        "{stderr}"
    );
    assert!(stderr.contains("last record of vehicle 2"));
    assert!(out.join("pair_safe_partial.csv").exists());
}

#[test]
fn check_lists_every_criterion() {
    let result = Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(["check", "--list"])
        .output()
        .unwrap();
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    let ids: Vec<_> = stdout
        .lines()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(ids, ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9"]);
}
