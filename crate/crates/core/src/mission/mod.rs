//! Mission sequencing: scan, zone selection, guarded descent and release,
//! verification with reattempt, ground operations and retrieval.

mod log;
mod phase;
mod step;
mod verify;

pub use log::{EventLog, EventLogEntry};
pub use phase::{transition_allowed, MissionMode, Phase};
pub use step::{
    ground_ops_route, mission_step, MissionCommands, MissionConfig, MissionEvent, MissionState,
    MissionTransition, Observations, WinchDirective,
};
pub use verify::{
    verify_detachment, verify_touchdown, DeploymentVerdict, VerdictEvidence, VerdictOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("ground plane is degenerate: {0}")]
    DegeneratePlane(String),
    #[error("event log times must be non-decreasing: {prev} then {next}")]
    TimeRegression { prev: f64, next: f64 },
}
