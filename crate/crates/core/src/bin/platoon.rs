use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use platoon_core::check;
use platoon_core::output::{compare_svg, summary_table, write_run};
use platoon_core::scenario::resolve_scenario;
use platoon_core::sim::{run_simulation, SimError, SimLog};
use platoon_core::{ControllerMode, PlatoonConfig};

/// Safe platoon formation and merging simulator.
#[derive(Parser)]
#[command(name = "platoon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its CSV log and plots.
    Run {
        /// Bundled scenario name (scenario_A, scenario_B, scenario_C) or a file.
        scenario: String,
        /// Override the scenario's controller mode.
        #[arg(long)]
        mode: Option<ControllerMode>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate a scenario in both modes and compare them.
    Compare {
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the acceptance criteria.
    Check {
        /// Print the criterion ids without running them.
        #[arg(long)]
        list: bool,
    },
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLATOON_LOG_LEVEL", "error"))
        .format_timestamp(None)
        .init();
}

fn stem(config: &PlatoonConfig) -> String {
    format!("{}_{}", config.name, config.mode)
}

/// Writes whatever the run produced. Returns the log on success.
fn finish(result: Result<SimLog, SimError>, dir: &Path, stem: &str) -> Result<SimLog, ExitCode> {
    match result {
        Ok(log) => {
            if let Err(e) = write_run(&log, dir, stem) {
                eprintln!("error: writing outputs to {}: {e}", dir.display());
                return Err(ExitCode::from(2));
            }
            Ok(log)
        }
        Err(SimError::Aborted {
            t,
            vehicle,
            cause,
            partial,
        }) => {
            eprintln!("aborted: t = {t:.2} s, vehicle {vehicle}: {cause}");
            if let Some(v) = partial
                .records
                .last()
                .and_then(|r| r.vehicles.get(vehicle - 1))
            {
                eprintln!(
                    "last record of vehicle {vehicle}: x = {:.4}, y = {:.4}, theta = {:.4}, v = {:.4}, s = {:.4}, y_tilde = {:.4}, theta_tilde = {:.4}",
                    v.state.x, v.state.y, v.state.theta, v.state.v, v.frenet.s, v.frenet.y_tilde, v.frenet.theta_tilde
                );
            }
            if let Err(e) = write_run(&partial, dir, &format!("{stem}_partial")) {
                eprintln!("error: writing partial outputs: {e}");
            }
            Err(ExitCode::from(1))
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn run(scenario: &str, mode: Option<ControllerMode>, out: &Path) -> ExitCode {
    let mut config = match resolve_scenario(scenario) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(mode) = mode {
        config.mode = mode;
    }
    let stem = stem(&config);
    log::info!("running {stem}");
    match finish(run_simulation(&config), out, &stem) {
        Ok(log) => {
            print!("{}", summary_table(&[(config.mode.as_str(), &log.summary)]));
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn compare(scenario: &str, out: &Path) -> ExitCode {
    let config = match resolve_scenario(scenario) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let safe = PlatoonConfig {
        mode: ControllerMode::Safe,
        ..config.clone()
    };
    let baseline = PlatoonConfig {
        mode: ControllerMode::Baseline,
        ..config
    };
    let (safe_result, baseline_result) = std::thread::scope(|scope| {
        let handle = scope.spawn(|| run_simulation(&baseline));
        let safe_result = run_simulation(&safe);
        (safe_result, handle.join().expect("baseline run panicked"))
    });
    let safe_log = finish(safe_result, out, &stem(&safe));
    let baseline_log = finish(baseline_result, out, &stem(&baseline));
    let (safe_log, baseline_log) = match (safe_log, baseline_log) {
        (Ok(s), Ok(b)) => (s, b),
        (Err(code), _) | (_, Err(code)) => return code,
    };
    let table = summary_table(&[
        ("safe", &safe_log.summary),
        ("baseline", &baseline_log.summary),
    ]);
    let name = &safe_log.config.name;
    let written = std::fs::write(
        out.join(format!("{name}_compare.svg")),
        compare_svg(&safe_log, &baseline_log),
    )
    .and_then(|()| std::fs::write(out.join(format!("{name}_summary.txt")), &table));
    if let Err(e) = written {
        eprintln!("error: writing outputs to {}: {e}", out.display());
        return ExitCode::from(2);
    }
    print!("{table}");
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    init_logging();
    match Cli::parse().command {
        Command::Run {
            scenario,
            mode,
            out,
        } => run(&scenario, mode, &out),
        Command::Compare { scenario, out } => compare(&scenario, &out),
        Command::Check { list } => {
            if list {
                for c in check::CRITERIA {
                    println!("{}  {}", c.id, c.title);
                }
                return ExitCode::SUCCESS;
            }
            let mut all = true;
            for (c, outcome) in check::run_all() {
                all &= outcome.passed;
                println!("{}", check::report_line(c, &outcome));
            }
            if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
