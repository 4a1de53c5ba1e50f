//! The run trace: one JSON object per line, tagged by `event`. Every
//! evaluation number is recomputable from these events alone.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::committee::CommitteeMode;
use crate::error::{Error, Result};
use crate::fast_loop::FastLoopConfig;
use crate::slow_loop::MetricThreshold;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStart {
    pub task: String,
    pub candidates: usize,
    pub config: FastLoopConfig,
    /// Candidate indices of ground-truth pairs that survived blocking.
    pub truth: Vec<usize>,
    /// Size of the full ground truth, blocking misses included.
    pub truth_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub pair: usize,
    pub group: usize,
    pub p: f64,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub batch: usize,
    pub annotated: usize,
    pub annotated_matches: usize,
    pub mode: CommitteeMode,
    pub members: Vec<MemberRecord>,
    /// Unannotated pairs the committee predicts as matches.
    pub predicted: Vec<usize>,
    pub stop_indicator: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub iteration: usize,
    pub snapshot_at: usize,
    pub adopted_at: usize,
    pub trained: bool,
    pub relaxed: bool,
    pub thresholds: Vec<MetricThreshold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationOp {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    RunStart(RunStart),
    Query { batch: usize, pairs: Vec<QueryItem> },
    Annotation { batch: usize, labels: Vec<(usize, bool)> },
    Publication(PublicationRecord),
    Snapshot(SnapshotRecord),
    Timing { batch: usize, response_ms: f64 },
    Final { predicted: Vec<usize>, annotated: usize, annotated_matches: usize, cost: usize },
    Verification { decisions: Vec<(usize, bool)> },
    Observation { op: ObservationOp, pair: usize, note: Option<String> },
    Aborted { reason: String, annotated: usize },
}

pub fn write_event(out: &mut impl Write, event: &TraceEvent) -> Result<()> {
    serde_json::to_writer(&mut *out, event).map_err(|e| Error::Trace(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_trace(out: &mut impl Write, events: &[TraceEvent]) -> Result<()> {
    for e in events {
        write_event(out, e)?;
    }
    out.flush()?;
    Ok(())
}

pub fn trace_to_string(events: &[TraceEvent]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, events).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_trace(input: impl BufRead) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| Error::Trace(format!("line {}: {e}", n + 1)))?;
        events.push(event);
    }
    Ok(events)
}

pub fn run_start(events: &[TraceEvent]) -> Result<&RunStart> {
    match events.first() {
        Some(TraceEvent::RunStart(start)) => Ok(start),
        _ => Err(Error::Trace("trace does not begin with run_start".into())),
    }
}
