//! Parallel execution of a set of scenarios.
//!
//! Each scenario gets a seed offset by its index, so a batch is reproducible
//! regardless of how the work is scheduled across threads: every run is a
//! pure function of its own config and derived seed.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::runner::{run_scenario, RunOutcome, RunReport};
use super::ScenarioError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchEntry {
    pub name: String,
    pub seed: u64,
    pub out_dir: String,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchReport {
    pub entries: Vec<BatchEntry>,
    pub succeeded: usize,
    pub failed: usize,
    pub wall_time_s: f64,
}

/// Runs every scenario with `jobs` worker threads and writes each run into
/// `out_root/<index>_<name>/`, plus a `batch_report.json` summary. Entry
/// order matches config order whatever the thread interleaving was.
pub fn run_batch(
    configs: &[ScenarioConfig],
    out_root: &Path,
    jobs: usize,
) -> Result<BatchReport, ScenarioError> {
    let started = Instant::now();
    std::fs::create_dir_all(out_root)?;
    let jobs = jobs.max(1).min(configs.len().max(1));

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<BatchEntry>>> = Mutex::new(vec![None; configs.len()]);

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let mut config = configs[i].clone();
                config.seed = config.seed.wrapping_add(i as u64);
                let out_dir = out_root.join(format!("{:03}_{}", i, config.name));
                let entry = match run_scenario(&config, &out_dir) {
                    Ok(report) => BatchEntry {
                        name: config.name.clone(),
                        seed: config.seed,
                        out_dir: out_dir.to_string_lossy().into_owned(),
                        report: Some(report),
                        error: None,
                    },
                    Err(e) => BatchEntry {
                        name: config.name.clone(),
                        seed: config.seed,
                        out_dir: out_dir.to_string_lossy().into_owned(),
                        report: None,
                        error: Some(e.to_string()),
                    },
                };
                slots.lock().expect("result mutex")[i] = Some(entry);
            });
        }
    });

    let entries: Vec<BatchEntry> = slots
        .into_inner()
        .expect("result mutex")
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.unwrap_or_else(|| panic!("missing batch result {i}")))
        .collect();
    let succeeded = entries
        .iter()
        .filter(|e| {
            e.report
                .as_ref()
                .is_some_and(|r| r.outcome == RunOutcome::Success)
        })
        .count();
    let report = BatchReport {
        failed: entries.len() - succeeded,
        succeeded,
        wall_time_s: started.elapsed().as_secs_f64(),
        entries,
    };
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out_root.join("batch_report.json"), json)?;
    Ok(report)
}
