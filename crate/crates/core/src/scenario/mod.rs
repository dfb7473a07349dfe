//! Scenario configs and the closed-loop runner.
//!
//! A scenario file describes one mission end to end: the terrain, the
//! carrier and its winch, the ground vehicle, sensing, control gains,
//! mission parameters and any injected faults. [`run_scenario`] builds the
//! world, closes the perception/mission/control loop at the simulation rate
//! and writes the event log, per-body trajectories and a run report to an
//! output directory. Everything downstream of the config and seed is
//! deterministic, so two runs of the same file produce byte-identical logs.

mod batch;
mod config;
mod plot;
mod runner;

pub use batch::{run_batch, BatchEntry, BatchReport};
pub use config::{
    validate_config, BlackoutConfig, CameraConfig, ControlConfig, FaultConfig, HeadConfig,
    PerceptionConfig, RaisedBox, ScenarioConfig, TerrainConfig, UavConfig, UgvConfig, Violation,
    WinchConfig,
};
pub use plot::emit_plot_data;
pub use runner::{run_scenario, RunOutcome, RunReport};

use thiserror::Error;

use crate::world::WorldError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid config: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("world error: {0}")]
    World(#[from] WorldError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log at {0} holds no telemetry to plot")]
    EmptyLog(String),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
