//! `crashguard` command-line interface.
//!
//! Exit codes: 0 when nothing was flagged, 1 when an action was selected
//! (assess) or a crash occurred (simulate), 2 on any input error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use tracing::info;

use crate::config::Thresholds;
use crate::estimation::{build_vehicle_model, ingest_trajectories, ModelDocument, VehicleModel};
use crate::output::to_stable_json;
use crate::prediction::{assess_with, CarId, EncounterInput};
use crate::simulator::{load_scenario, run};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FLAGGED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

/// Environment variable holding the log filter (e.g. `info`, `crashguard=debug`).
pub const LOG_ENV: &str = "CRASHGUARD_LOG";

#[derive(Debug, Parser)]
#[command(name = "crashguard", version, about = "Markov-model highway crash prediction and active-safety simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate one two-layer model per vehicle from a trajectory CSV.
    Estimate {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Seconds between consecutive frames.
        #[arg(long, default_value_t = crate::config::DEFAULT_FRAME_INTERVAL_S)]
        frame_interval: f64,
    },
    /// Assess a two-car encounter and print the crash assessment.
    Assess {
        #[arg(long)]
        model1: PathBuf,
        #[arg(long)]
        model2: PathBuf,
        /// Longitudinal gap between the cars, m.
        #[arg(long)]
        gap: f64,
        /// Which car is ahead: car1 or car2.
        #[arg(long)]
        front: CarId,
        /// Use this crash time (s) instead of gap / closing speed.
        #[arg(long)]
        t_override: Option<f64>,
        #[arg(long, default_value_t = 0.3)]
        crash_threshold: f64,
        #[arg(long, default_value_t = 0.5)]
        speed_threshold: f64,
        /// Write the assessment here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file and write the simulation report.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        report_path: Option<PathBuf>,
        /// Assess every step but never apply safety actions.
        #[arg(long)]
        disable_actions: bool,
        /// Put car 1 in car 2's lane.
        #[arg(long)]
        force_same_lane: bool,
        #[arg(long)]
        time_step: Option<f64>,
    },
}

/// Installs the stderr logger; safe to call more than once.
pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env(LOG_ENV)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_INPUT_ERROR
        }
    }
}

fn execute(command: Command) -> Result<i32, String> {
    match command {
        Command::Estimate {
            csv,
            out_dir,
            frame_interval,
        } => cmd_estimate(&csv, &out_dir, frame_interval),
        Command::Assess {
            model1,
            model2,
            gap,
            front,
            t_override,
            crash_threshold,
            speed_threshold,
            out,
        } => {
            let thresholds = Thresholds {
                speed_stability: speed_threshold,
                crash: crash_threshold,
            };
            cmd_assess(&model1, &model2, gap, front, t_override, thresholds, out.as_deref())
        }
        Command::Simulate {
            scenario,
            report_path,
            disable_actions,
            force_same_lane,
            time_step,
        } => cmd_simulate(&scenario, report_path.as_deref(), disable_actions, force_same_lane, time_step),
    }
}

pub fn cmd_estimate(csv: &Path, out_dir: &Path, frame_interval: f64) -> Result<i32, String> {
    if !(frame_interval > 0.0 && frame_interval.is_finite()) {
        return Err(format!("--frame-interval {frame_interval} must be positive"));
    }
    let file = fs::File::open(csv).map_err(|e| format!("{}: {e}", csv.display()))?;
    let grouped = ingest_trajectories(file).map_err(|e| format!("{}: {e}", csv.display()))?;
    if grouped.is_empty() {
        return Err(format!("{}: no records", csv.display()));
    }
    let mut models = Vec::with_capacity(grouped.len());
    for (vehicle, records) in &grouped {
        let model = build_vehicle_model(records, frame_interval).map_err(|e| format!("vehicle {vehicle}: {e}"))?;
        models.push((*vehicle, records.len(), model));
    }
    fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    for (vehicle, count, model) in &models {
        let path = out_dir.join(format!("vehicle_{vehicle}.json"));
        write_text(&path, &model_json(model)?)?;
        let lane_changes = grouped[vehicle].windows(2).filter(|w| w[0].lane != w[1].lane).count();
        println!(
            "vehicle {vehicle}: {count} records, {} transition pairs, {lane_changes} lane changes, unobserved lane rows {:?}, unobserved speed rows {:?} -> {}",
            count - 1,
            one_based(&model.unobserved_lane_rows),
            one_based(&model.unobserved_speed_rows),
            path.display()
        );
    }
    info!(vehicles = models.len(), "estimation finished");
    Ok(EXIT_OK)
}

fn one_based(rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|r| r + 1).collect()
}

/// Model JSON with sorted keys and full float precision, so rows still sum
/// to one when read back.
pub fn model_json(model: &VehicleModel) -> Result<String, String> {
    let value = serde_json::to_value(ModelDocument::from(model)).map_err(|e| e.to_string())?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| e.to_string())?;
    text.push('\n');
    Ok(text)
}

pub fn load_model(path: &Path) -> Result<VehicleModel, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    doc.into_model(None).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn cmd_assess(
    model1: &Path,
    model2: &Path,
    gap: f64,
    front: CarId,
    t_override: Option<f64>,
    thresholds: Thresholds,
    out: Option<&Path>,
) -> Result<i32, String> {
    thresholds.validate()?;
    if !(gap >= 0.0 && gap.is_finite()) {
        return Err(format!("--gap {gap} must be a nonnegative distance"));
    }
    if let Some(t) = t_override {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(format!("--t-override {t} must be nonnegative"));
        }
    }
    let input = EncounterInput {
        car1: load_model(model1)?,
        car2: load_model(model2)?,
        gap_d: gap,
        front_car: front,
        thresholds,
    };
    let assessment = assess_with(&input, t_override).map_err(|e| e.to_string())?;
    let text = to_stable_json(&assessment).map_err(|e| e.to_string())?;
    emit(&text, out)?;
    Ok(if assessment.has_actions() { EXIT_FLAGGED } else { EXIT_OK })
}

pub fn cmd_simulate(
    scenario: &Path,
    report_path: Option<&Path>,
    disable_actions: bool,
    force_same_lane: bool,
    time_step: Option<f64>,
) -> Result<i32, String> {
    let mut config = load_scenario(scenario).map_err(|e| e.to_string())?;
    config.disable_actions |= disable_actions;
    config.force_same_lane |= force_same_lane;
    if let Some(dt) = time_step {
        config.time_step_s = dt;
    }
    let report = run(&config).map_err(|e| e.to_string())?;
    let text = to_stable_json(&report).map_err(|e| e.to_string())?;
    emit(&text, report_path)?;
    info!(crash = report.crash, min_gap_m = report.min_gap_m, "simulation finished");
    Ok(if report.crash { EXIT_FLAGGED } else { EXIT_OK })
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), String> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}
