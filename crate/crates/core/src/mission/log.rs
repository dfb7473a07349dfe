//! Structured mission event log: one timestamped entry per event, times
//! non-decreasing, serializable as JSON Lines.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::phase::Phase;
use super::MissionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogEntry {
    pub time: f64,
    pub phase: Phase,
    pub kind: String,
    #[serde(default)]
    pub payload: Map<String, Value>,
}

impl EventLogEntry {
    pub fn new(time: f64, phase: Phase, kind: impl Into<String>) -> Self {
        Self {
            time,
            phase,
            kind: kind.into(),
            payload: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }
}

/// Append-only log enforcing the time ordering invariant.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    entries: Vec<EventLogEntry>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: EventLogEntry) -> Result<(), MissionError> {
        if let Some(last) = self.entries.last() {
            if entry.time < last.time {
                return Err(MissionError::TimeRegression {
                    prev: last.time,
                    next: entry.time,
                });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[EventLogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }
}
