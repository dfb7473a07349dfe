//! Turns an event log into two-column CSV series ready for plotting.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::ScenarioError;

/// Extracts the named telemetry series from `events_path` and writes one
/// `<name>.csv` per series into `out_dir`. Names that never appear in the
/// log are warned about and skipped; a log without telemetry is an error.
pub fn emit_plot_data(
    events_path: &Path,
    series: &[String],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ScenarioError> {
    let file = std::fs::File::open(events_path)?;
    let mut telemetry: Vec<(f64, Value)> = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(value) = serde_json::from_str::<Value>(&line) else {
            continue;
        };
        if value.get("kind").and_then(Value::as_str) != Some("Telemetry") {
            continue;
        }
        let Some(time) = value.get("time").and_then(Value::as_f64) else {
            continue;
        };
        if let Some(payload) = value.get("payload") {
            telemetry.push((time, payload.clone()));
        }
    }
    if telemetry.is_empty() {
        return Err(ScenarioError::EmptyLog(
            events_path.to_string_lossy().into_owned(),
        ));
    }

    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for name in series {
        let mut rows = format!("time,{name}\n");
        let mut count = 0usize;
        for (time, payload) in &telemetry {
            if let Some(v) = payload.get(name.as_str()).and_then(Value::as_f64) {
                rows.push_str(&format!("{time:.3},{v}\n"));
                count += 1;
            }
        }
        if count == 0 {
            log::warn!("series {name:?} not present in {}", events_path.display());
            continue;
        }
        let path = out_dir.join(format!("{name}.csv"));
        std::fs::write(&path, rows)?;
        written.push(path);
    }
    Ok(written)
}
