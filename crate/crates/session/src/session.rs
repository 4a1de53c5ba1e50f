//! One annotation session: the engine plus phase, observation list and
//! durable trace. Everything here is synchronous; the HTTP layer serializes
//! access per session.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use dualmatch_core::committee::EnsembleMode;
use dualmatch_core::fast_loop::{QueryBatch, ResponseStats};
use dualmatch_core::trace::{read_trace, trace_to_string, ObservationOp};
use dualmatch_core::{Engine, Exec, FastLoopConfig, Scheduling, Strategy, TaskContext, TraceEvent};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const HEADER_FILE: &str = "header.json";
pub const TRACE_FILE: &str = "trace.jsonl";
/// Batch size when the client does not pick one.
pub const DEFAULT_BATCH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Annotating,
    Verifying,
    Closed,
}

/// An expert's decision on one queried pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    /// Accept the predicted label.
    #[serde(rename = "confirm")]
    Confirm,
    #[serde(rename = "revise-to-0")]
    ReviseTo0,
    #[serde(rename = "revise-to-1")]
    ReviseTo1,
}

impl Answer {
    pub fn label(self, predicted: bool) -> bool {
        match self {
            Answer::Confirm => predicted,
            Answer::ReviseTo0 => false,
            Answer::ReviseTo1 => true,
        }
    }
}

/// Loop settings a client may override; everything else uses defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct SessionSettings {
    pub batch: Option<usize>,
    /// Defaults to max(|X|, batch), i.e. no budget cap.
    pub budget: Option<usize>,
    pub strategy: Option<Strategy>,
    pub ensemble: Option<EnsembleMode>,
    pub slow_loop: Option<bool>,
    pub scheduling: Option<Scheduling>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
}

impl SessionSettings {
    pub fn resolve(&self, candidates: usize) -> FastLoopConfig {
        let mut config = FastLoopConfig::default();
        config.batch = self.batch.unwrap_or(DEFAULT_BATCH);
        config.budget = self.budget.unwrap_or(candidates.max(config.batch));
        config.strategy = self.strategy.unwrap_or(config.strategy);
        config.ensemble = self.ensemble.unwrap_or(config.ensemble);
        config.slow_loop = self.slow_loop.unwrap_or(config.slow_loop);
        // Humans think for seconds between batches; the slow loop runs then.
        config.scheduling = self.scheduling.unwrap_or(Scheduling::Concurrent);
        config.seed = self.seed.unwrap_or(0);
        if let Some(delta) = self.delta {
            config.slow.delta = delta;
        }
        config
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionHeader {
    pub session_id: String,
    pub task_id: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmitReceipt {
    /// The token had already been answered; nothing was appended.
    pub duplicate: bool,
    pub phase: Phase,
    pub annotated: usize,
    pub next_batch_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IndicatorSample {
    pub batch: usize,
    pub value: usize,
}

struct TraceLog {
    file: File,
    written: usize,
}

impl TraceLog {
    fn append(&mut self, events: &[TraceEvent]) -> std::io::Result<()> {
        if self.written >= events.len() {
            return Ok(());
        }
        self.file.write_all(trace_to_string(&events[self.written..]).as_bytes())?;
        self.file.sync_data()?;
        self.written = events.len();
        Ok(())
    }
}

pub struct Session {
    header: SessionHeader,
    engine: Engine,
    phase: Phase,
    observations: BTreeMap<usize, Option<String>>,
    final_matches: Option<Vec<usize>>,
    log: Option<TraceLog>,
}

impl Session {
    /// Starts a session and prepares its first batch. With `dir`, the header
    /// and trace are written there and kept current after every change.
    pub fn create(
        header: SessionHeader,
        ctx: Arc<TaskContext>,
        config: FastLoopConfig,
        dir: Option<&Path>,
    ) -> Result<Self> {
        let engine = Engine::new(ctx, config)?;
        let log = match dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(HEADER_FILE), serde_json::to_vec_pretty(&header).expect("header serializes"))?;
                let file = OpenOptions::new().create_new(true).append(true).open(dir.join(TRACE_FILE))?;
                Some(TraceLog { file, written: 0 })
            }
            None => None,
        };
        let mut session = Session {
            header,
            engine,
            phase: Phase::Annotating,
            observations: BTreeMap::new(),
            final_matches: None,
            log,
        };
        session.prepare();
        session.flush()?;
        Ok(session)
    }

    pub fn read_header(dir: &Path) -> Result<SessionHeader> {
        let raw = fs::read(dir.join(HEADER_FILE))?;
        serde_json::from_slice(&raw).map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))
    }

    /// Rebuilds a session from its directory. A torn final trace line, left
    /// by a crash during a write, is discarded.
    pub fn restore(dir: &Path, header: SessionHeader, ctx: Arc<TaskContext>) -> Result<Self> {
        let path = dir.join(TRACE_FILE);
        let mut text = fs::read_to_string(&path)?;
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            log::warn!("{}: dropping a torn trailing line", path.display());
            text.truncate(keep);
            fs::write(&path, &text)?;
        }
        let events = read_trace(text.as_bytes())?;
        let engine = Engine::replay(ctx, &events, Exec::default())?;
        let mut observations = BTreeMap::new();
        let mut decisions = None;
        for event in &events {
            match event {
                TraceEvent::Observation { op: ObservationOp::Add, pair, note } => {
                    observations.insert(*pair, note.clone());
                }
                TraceEvent::Observation { op: ObservationOp::Remove, pair, .. } => {
                    observations.remove(pair);
                }
                TraceEvent::Verification { decisions: d } => decisions = Some(d.clone()),
                _ => {}
            }
        }
        let phase = if decisions.is_some() {
            Phase::Closed
        } else if engine.final_prediction().is_some() {
            Phase::Verifying
        } else {
            Phase::Annotating
        };
        let final_matches = decisions.map(|d| final_alignment(engine.annotations().entries(), &d));
        let file = OpenOptions::new().append(true).open(&path)?;
        let log = Some(TraceLog { file, written: events.len() });
        let mut session = Session { header, engine, phase, observations, final_matches, log };
        session.prepare();
        session.flush()?;
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.header.session_id
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn context(&self) -> &Arc<TaskContext> {
        self.engine.context()
    }

    pub fn observations(&self) -> &BTreeMap<usize, Option<String>> {
        &self.observations
    }

    pub fn events(&self) -> &[TraceEvent] {
        self.engine.events()
    }

    pub fn token(&self, batch: usize) -> String {
        format!("{}-b{batch}", self.header.session_id)
    }

    fn answered_token(&self) -> Option<String> {
        let done = self.engine.batches_done();
        (done > 0).then(|| self.token(done))
    }

    fn flush(&mut self) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            log.append(self.engine.events())?;
        }
        Ok(())
    }

    /// Selects the next batch if none is pending; an empty selection ends
    /// the annotation phase.
    fn prepare(&mut self) {
        if self.phase != Phase::Annotating || self.engine.pending().is_some() {
            return;
        }
        if self.engine.next_batch().items.is_empty() {
            self.engine.finish();
            self.phase = Phase::Verifying;
        }
    }

    fn require(&self, phase: Phase) -> Result<()> {
        if self.phase != phase {
            return Err(ServiceError::Conflict(format!(
                "session {} is {:?}, not {:?}",
                self.header.session_id, self.phase, phase
            )));
        }
        Ok(())
    }

    /// The pending batch. Empty, with the session moved on to verifying,
    /// once U or the budget is exhausted.
    pub fn batch(&mut self) -> Result<QueryBatch> {
        self.require(Phase::Annotating)?;
        self.prepare();
        self.flush()?;
        Ok(self.engine.pending().cloned().unwrap_or_default())
    }

    pub fn pending_token(&self) -> Option<String> {
        self.engine.pending().filter(|_| self.phase == Phase::Annotating).map(|b| self.token(b.index))
    }

    fn receipt(&self, duplicate: bool) -> SubmitReceipt {
        SubmitReceipt {
            duplicate,
            phase: self.phase,
            annotated: self.engine.annotations().len(),
            next_batch_token: self.pending_token(),
        }
    }

    /// Applies answers for exactly the pending batch. A resubmission of the
    /// last answered token is acknowledged without appending anything.
    pub fn submit(&mut self, token: &str, answers: &BTreeMap<usize, Answer>) -> Result<SubmitReceipt> {
        if self.answered_token().as_deref() == Some(token) {
            return Ok(self.receipt(true));
        }
        self.require(Phase::Annotating)?;
        let Some(pending) = self.engine.pending() else {
            return Err(ServiceError::Conflict("no batch is pending".into()));
        };
        if token != self.token(pending.index) {
            return Err(ServiceError::Conflict(format!("batch token `{token}` is stale")));
        }
        if let Some(pair) = answers.keys().find(|p| !pending.items.iter().any(|q| q.pair == **p)) {
            return Err(ServiceError::BadRequest(format!("pair {pair} is not in the pending batch")));
        }
        if let Some(q) = pending.items.iter().find(|q| !answers.contains_key(&q.pair)) {
            return Err(ServiceError::BadRequest(format!("pair {} is unanswered", q.pair)));
        }
        let labels: Vec<(usize, bool)> =
            pending.items.iter().map(|q| (q.pair, answers[&q.pair].label(q.predicted))).collect();
        self.engine.submit(&labels)?;
        self.prepare();
        self.flush()?;
        Ok(self.receipt(false))
    }

    /// Ends annotation early, e.g. once the stop indicator settles.
    pub fn stop(&mut self) -> Result<()> {
        self.require(Phase::Annotating)?;
        self.engine.finish();
        self.phase = Phase::Verifying;
        self.flush()
    }

    /// Unannotated predicted matches awaiting verification, by descending p.
    pub fn predictions(&self) -> Result<Vec<usize>> {
        if self.phase == Phase::Annotating {
            return Err(ServiceError::Conflict("predictions are verified after annotation ends".into()));
        }
        Ok(self.engine.final_prediction().unwrap_or_default().to_vec())
    }

    /// Records accept/reject decisions on the predictions; undecided
    /// predictions count as rejected. Returns the final alignment.
    pub fn verify(&mut self, decisions: &BTreeMap<usize, bool>) -> Result<Vec<usize>> {
        self.require(Phase::Verifying)?;
        let predicted = self.engine.final_prediction().unwrap_or_default();
        if let Some(pair) = decisions.keys().find(|p| !predicted.contains(p)) {
            return Err(ServiceError::BadRequest(format!("pair {pair} is not a pending prediction")));
        }
        let recorded: Vec<(usize, bool)> =
            predicted.iter().map(|&p| (p, decisions.get(&p).copied().unwrap_or(false))).collect();
        let matches = final_alignment(self.engine.annotations().entries(), &recorded);
        self.engine.record(TraceEvent::Verification { decisions: recorded });
        self.final_matches = Some(matches.clone());
        self.phase = Phase::Closed;
        self.flush()?;
        Ok(matches)
    }

    pub fn final_matches(&self) -> Result<&[usize]> {
        self.final_matches.as_deref().ok_or_else(|| ServiceError::Conflict("the session is not verified yet".into()))
    }

    fn check_pair(&self, pair: usize) -> Result<()> {
        if pair >= self.context().len() {
            return Err(ServiceError::BadRequest(format!("unknown pair {pair}")));
        }
        Ok(())
    }

    /// Adds or re-notes a pair; returns whether the list changed.
    pub fn add_observation(&mut self, pair: usize, note: Option<String>) -> Result<bool> {
        self.check_pair(pair)?;
        match self.observations.get(&pair) {
            Some(existing) if note.is_none() || *existing == note => return Ok(false),
            _ => {}
        }
        self.observations.insert(pair, note.clone());
        self.engine.record(TraceEvent::Observation { op: ObservationOp::Add, pair, note });
        self.flush()?;
        Ok(true)
    }

    /// Returns false when the pair was not on the list.
    pub fn remove_observation(&mut self, pair: usize) -> Result<bool> {
        self.check_pair(pair)?;
        if self.observations.remove(&pair).is_none() {
            return Ok(false);
        }
        self.engine.record(TraceEvent::Observation { op: ObservationOp::Remove, pair, note: None });
        self.flush()?;
        Ok(true)
    }

    pub fn stop_history(&self) -> Vec<IndicatorSample> {
        self.engine.stop_history().iter().map(|&(batch, value)| IndicatorSample { batch, value }).collect()
    }

    pub fn response_stats(&self) -> ResponseStats {
        ResponseStats::from_samples(self.engine.response_times())
    }
}

/// Annotated matches plus accepted predictions, sorted. The two sets are
/// disjoint because predictions only cover unannotated pairs.
pub fn final_alignment(annotations: &[(usize, bool)], decisions: &[(usize, bool)]) -> Vec<usize> {
    let set: BTreeSet<usize> =
        annotations.iter().chain(decisions).filter(|(_, accepted)| *accepted).map(|&(pair, _)| pair).collect();
    set.into_iter().collect()
}
