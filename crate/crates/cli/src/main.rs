//! Command line front end for the marsupial deployment simulator.
//!
//! Subcommands: `validate` checks a scenario file and reports every
//! constraint violation, `run` executes one scenario and writes its
//! artifacts, `batch` runs every scenario in a directory with per-entry
//! seed offsets, and `plot-data` extracts time-series CSVs from a finished
//! run's event log.
//!
//! Exit codes are a stable contract: 0 success, 1 mission failure, abort or
//! timeout, 2 invalid configuration, 3 I/O trouble or an unusable log.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use marsupial_core::scenario::{
    emit_plot_data, run_batch, run_scenario, RunOutcome, RunReport, ScenarioConfig, ScenarioError,
};

/// Default output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "MARSUPIAL_OUT_DIR";

const EXIT_OK: u8 = 0;
const EXIT_MISSION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "marsupial",
    version,
    about = "Deterministic simulator for tethered deployment and retrieval missions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a scenario file and report every constraint violation.
    Validate {
        /// Scenario JSON file.
        config: PathBuf,
    },
    /// Run one scenario to completion and write events, trajectories and a report.
    Run {
        /// Scenario JSON file.
        config: PathBuf,
        /// Override the seed stored in the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $MARSUPIAL_OUT_DIR or ./out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario JSON file in a directory (sorted by file name).
    Batch {
        /// Directory of scenario JSON files.
        config_dir: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory [default: $MARSUPIAL_OUT_DIR or ./out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract time-series CSVs from a finished run.
    #[command(name = "plot-data")]
    PlotData {
        /// A run's report.json, or its events.jsonl directly.
        report: PathBuf,
        /// Comma-separated series names, e.g. clearance,separation,tether_length.
        #[arg(long, value_delimiter = ',', required = true)]
        series: Vec<String>,
        /// Output directory [default: alongside the event log].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Batch {
            config_dir,
            jobs,
            out,
        } => batch(&config_dir, jobs, out),
        Command::PlotData {
            report,
            series,
            out,
        } => plot_data(&report, &series, out),
    };
    ExitCode::from(code)
}

fn exit_code_for(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::InvalidConfig(_) | ScenarioError::Parse(_) => EXIT_CONFIG,
        ScenarioError::World(_) => EXIT_MISSION,
        ScenarioError::Io(_) | ScenarioError::EmptyLog(_) => EXIT_IO,
    }
}

fn out_base(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(path: &Path) -> Result<ScenarioConfig, u8> {
    ScenarioConfig::from_path(path).map_err(|err| {
        eprintln!("{}: {err}", path.display());
        exit_code_for(&err)
    })
}

fn outcome_str(outcome: RunOutcome) -> &'static str {
    match outcome {
        RunOutcome::Success => "success",
        RunOutcome::Aborted => "aborted",
        RunOutcome::Timeout => "timeout",
    }
}

fn validate(path: &Path) -> u8 {
    let cfg = match load_config(path) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let violations = cfg.validate();
    if violations.is_empty() {
        println!("{}: ok ({}, seed {})", path.display(), cfg.name, cfg.seed);
        return EXIT_OK;
    }
    for v in &violations {
        eprintln!("{}: {v}", path.display());
    }
    eprintln!("{} violation(s)", violations.len());
    EXIT_CONFIG
}

fn run(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> u8 {
    let mut cfg = match load_config(path) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let out_dir = out_base(out);
    match run_scenario(&cfg, &out_dir) {
        Ok(report) => {
            println!(
                "{} seed {}: {} in phase {} after {:.1}s sim ({} steps, {:.2}s wall), \
                 attempts {}, artifacts in {}",
                report.name,
                report.seed,
                outcome_str(report.outcome),
                report.final_phase,
                report.sim_time,
                report.steps,
                report.wall_time_s,
                report.attempt_count,
                report.out_dir,
            );
            if report.outcome == RunOutcome::Success {
                EXIT_OK
            } else {
                EXIT_MISSION
            }
        }
        Err(err) => {
            eprintln!("run failed: {err}");
            exit_code_for(&err)
        }
    }
}

fn batch(dir: &Path, jobs: usize, out: Option<PathBuf>) -> u8 {
    let entries = match std::fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(err) => {
            eprintln!("{}: {err}", dir.display());
            return EXIT_IO;
        }
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        eprintln!("{}: no .json scenario files", dir.display());
        return EXIT_CONFIG;
    }

    // Reject the whole batch up front rather than discover a bad file
    // halfway through a long run.
    let mut configs = Vec::with_capacity(paths.len());
    let mut rejected = 0u32;
    for path in &paths {
        match ScenarioConfig::from_path(path) {
            Ok(cfg) => {
                let violations = cfg.validate();
                if violations.is_empty() {
                    configs.push(cfg);
                } else {
                    for v in &violations {
                        eprintln!("{}: {v}", path.display());
                    }
                    rejected += 1;
                }
            }
            Err(err) => {
                eprintln!("{}: {err}", path.display());
                rejected += 1;
            }
        }
    }
    if rejected > 0 {
        eprintln!("{rejected} scenario file(s) rejected; nothing was run");
        return EXIT_CONFIG;
    }

    let out_root = out_base(out);
    match run_batch(&configs, &out_root, jobs) {
        Ok(report) => {
            for entry in &report.entries {
                match (&entry.report, &entry.error) {
                    (Some(r), _) => println!(
                        "{} seed {}: {} ({})",
                        entry.name,
                        entry.seed,
                        outcome_str(r.outcome),
                        r.final_phase
                    ),
                    (None, Some(e)) => println!("{} seed {}: error: {e}", entry.name, entry.seed),
                    (None, None) => println!("{} seed {}: missing result", entry.name, entry.seed),
                }
            }
            println!(
                "{}/{} succeeded in {:.2}s, artifacts in {}",
                report.succeeded,
                report.entries.len(),
                report.wall_time_s,
                out_root.display()
            );
            if report.failed == 0 {
                EXIT_OK
            } else {
                EXIT_MISSION
            }
        }
        Err(err) => {
            eprintln!("batch failed: {err}");
            exit_code_for(&err)
        }
    }
}

fn plot_data(input: &Path, series: &[String], out: Option<PathBuf>) -> u8 {
    let events = match resolve_events_path(input) {
        Ok(path) => path,
        Err(code) => return code,
    };
    let out_dir = out.unwrap_or_else(|| {
        events
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    match emit_plot_data(&events, series, &out_dir) {
        Ok(files) if files.is_empty() => {
            eprintln!(
                "none of the requested series appear in {}",
                events.display()
            );
            EXIT_IO
        }
        Ok(files) => {
            for file in &files {
                println!("{}", file.display());
            }
            EXIT_OK
        }
        Err(err) => {
            eprintln!("plot-data failed: {err}");
            exit_code_for(&err)
        }
    }
}

/// A report.json names its event log; anything else is treated as the event
/// log itself. A stale recorded path falls back to the report's sibling.
fn resolve_events_path(input: &Path) -> Result<PathBuf, u8> {
    let text = std::fs::read_to_string(input).map_err(|err| {
        eprintln!("{}: {err}", input.display());
        EXIT_IO
    })?;
    match serde_json::from_str::<RunReport>(&text) {
        Ok(report) => {
            let recorded = PathBuf::from(&report.events_path);
            if recorded.exists() {
                return Ok(recorded);
            }
            if let Some(parent) = input.parent() {
                let sibling = parent.join("events.jsonl");
                if sibling.exists() {
                    return Ok(sibling);
                }
            }
            eprintln!(
                "event log {} named by {} not found",
                report.events_path,
                input.display()
            );
            Err(EXIT_IO)
        }
        Err(_) => Ok(input.to_path_buf()),
    }
}
