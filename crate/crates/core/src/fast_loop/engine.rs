use std::sync::Arc;
use std::time::{Duration, Instant};

use super::worker::Worker;
use super::{
    entropy_select_batch, match_vote_counts, select_query_batch, FastLoopConfig, ResponseStats, Scheduling, Strategy,
};
use crate::committee::{CommitteeModel, CommitteePrediction};
use crate::context::TaskContext;
use crate::error::{Error, Result};
use crate::labeling::{AnnotationStore, FunctionVotes, InitialLf};
use crate::slow_loop::{initial_tunable_functions, replay_publication, Publication, SlowLoop, SlowSnapshot};
use crate::trace::{MemberRecord, PublicationRecord, QueryItem, RunStart, SnapshotRecord, TraceEvent};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryBatch {
    /// 1-based batch number.
    pub index: usize,
    pub items: Vec<QueryItem>,
}

impl QueryBatch {
    pub fn pairs(&self) -> Vec<usize> {
        self.items.iter().map(|q| q.pair).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub events: Vec<TraceEvent>,
    pub final_prediction: Vec<usize>,
    pub annotations: AnnotationStore,
    pub response_times: Vec<Duration>,
    pub aborted: Option<String>,
}

impl RunOutcome {
    pub fn response_stats(&self) -> ResponseStats {
        ResponseStats::from_samples(&self.response_times)
    }
}

enum SlowDriver {
    Off,
    Sync(SlowLoop),
    Concurrent(Worker),
}

const INITIAL: usize = InitialLf::ALL.len();

/// Owns A, U, Λ and the committee for one run. Callers alternate
/// [`Engine::next_batch`] and [`Engine::submit`], then call
/// [`Engine::finish`].
pub struct Engine {
    ctx: Arc<TaskContext>,
    config: FastLoopConfig,
    functions: Vec<FunctionVotes>,
    match_counts: Vec<usize>,
    annotations: AnnotationStore,
    committee: CommitteeModel,
    predictions: Vec<CommitteePrediction>,
    slow: SlowDriver,
    last_slow_snapshot: Option<usize>,
    batches_done: usize,
    pending: Option<QueryBatch>,
    events: Vec<TraceEvent>,
    recording: bool,
    answered_at: Option<Instant>,
    response_times: Vec<Duration>,
    stop_history: Vec<(usize, usize)>,
    final_prediction: Option<Vec<usize>>,
    aborted: Option<String>,
}

impl Engine {
    pub fn new(ctx: Arc<TaskContext>, config: FastLoopConfig) -> Result<Self> {
        let mut engine = Self::blank(ctx, config)?;
        engine.start_slow_driver(None);
        engine.emit_snapshot();
        Ok(engine)
    }

    fn blank(ctx: Arc<TaskContext>, config: FastLoopConfig) -> Result<Self> {
        config.validate()?;
        let mut functions = ctx.initial_votes.clone();
        if config.slow_loop {
            functions.extend(initial_tunable_functions(&ctx));
        }
        let n = ctx.len();
        let annotations = AnnotationStore::new(n);
        let committee = CommitteeModel::uniform(&functions, 0);
        let predictions = committee.predict_all(&functions, n, config.exec);
        let match_counts = match_vote_counts(&functions, n);
        let start = TraceEvent::RunStart(RunStart {
            task: ctx.task_id.clone(),
            candidates: n,
            config: config.clone(),
            truth: ctx.truth_indices.clone(),
            truth_total: ctx.truth_total(),
        });
        Ok(Engine {
            ctx,
            config,
            functions,
            match_counts,
            annotations,
            committee,
            predictions,
            slow: SlowDriver::Off,
            last_slow_snapshot: None,
            batches_done: 0,
            pending: None,
            events: vec![start],
            recording: true,
            answered_at: None,
            response_times: Vec::new(),
            stop_history: Vec::new(),
            final_prediction: None,
            aborted: None,
        })
    }

    fn start_slow_driver(&mut self, restored: Option<SlowLoop>) {
        if !self.config.slow_loop {
            return;
        }
        let slow = restored.unwrap_or_else(|| SlowLoop::new(self.config.slow, self.config.seed));
        self.slow = match self.config.scheduling {
            Scheduling::Deterministic => SlowDriver::Sync(slow),
            Scheduling::Concurrent => SlowDriver::Concurrent(Worker::spawn(self.ctx.clone(), slow)),
        };
    }

    /// Rebuilds an engine from a recorded trace. Publications are rebuilt
    /// from their recorded thresholds; queries are recomputed and checked.
    pub fn replay(ctx: Arc<TaskContext>, events: &[TraceEvent], exec: crate::exec::Exec) -> Result<Self> {
        let start = crate::trace::run_start(events)?;
        if start.candidates != ctx.len() {
            return Err(Error::Trace(format!("trace has {} candidates, task has {}", start.candidates, ctx.len())));
        }
        let mut config = start.config.clone();
        config.exec = exec;
        let mut engine = Self::blank(ctx.clone(), config)?;
        engine.recording = false;
        let mut slow_state: Option<SlowLoop> =
            engine.config.slow_loop.then(|| SlowLoop::new(engine.config.slow, engine.config.seed));
        let mut awaiting_snapshot = false;
        for event in &events[1..] {
            match event {
                TraceEvent::Query { batch, pairs } => {
                    let computed = engine.next_batch();
                    if computed.index != *batch
                        || computed.items.iter().map(|q| q.pair).ne(pairs.iter().map(|q| q.pair))
                    {
                        return Err(Error::Trace(format!("replay diverged at batch {batch}")));
                    }
                }
                TraceEvent::Annotation { labels, .. } => {
                    engine.apply_answers(labels)?;
                    awaiting_snapshot = true;
                }
                TraceEvent::Publication(record) => {
                    let prefix = engine.annotations.prefix(record.snapshot_at);
                    let functions = replay_publication(
                        &ctx,
                        &prefix,
                        &record.thresholds,
                        &engine.config.slow,
                        engine.config.seed,
                        exec,
                    );
                    engine.install_tunable(functions);
                    if let Some(slow) = slow_state.as_mut() {
                        slow.iterations = record.iteration;
                        for (slot, t) in record.thresholds.iter().enumerate() {
                            slow.state.thresholds[slot] = t.h;
                            slow.state.relaxations[slot] = (t.h_max / slow.state.delta).round() as u32;
                        }
                    }
                    engine.last_slow_snapshot = Some(record.snapshot_at);
                }
                TraceEvent::Snapshot(_) => {
                    if awaiting_snapshot {
                        engine.refit();
                        engine.batches_done += 1;
                        awaiting_snapshot = false;
                    }
                    engine.record_stop_indicator();
                }
                TraceEvent::Timing { response_ms, .. } => {
                    engine.response_times.push(Duration::from_secs_f64(response_ms / 1000.0));
                }
                TraceEvent::Final { .. } => {
                    engine.pending = None;
                    engine.final_prediction = Some(engine.compute_final());
                }
                TraceEvent::Aborted { reason, .. } => engine.aborted = Some(reason.clone()),
                TraceEvent::RunStart(_) => return Err(Error::Trace("second run_start".into())),
                TraceEvent::Verification { .. } | TraceEvent::Observation { .. } => {}
            }
        }
        engine.events = events.to_vec();
        engine.recording = true;
        engine.start_slow_driver(slow_state);
        if awaiting_snapshot {
            // The trace stopped in the middle of a batch boundary.
            engine.boundary();
        }
        Ok(engine)
    }

    pub fn context(&self) -> &Arc<TaskContext> {
        &self.ctx
    }

    pub fn config(&self) -> &FastLoopConfig {
        &self.config
    }

    pub fn annotations(&self) -> &AnnotationStore {
        &self.annotations
    }

    pub fn functions(&self) -> &[FunctionVotes] {
        &self.functions
    }

    pub fn committee(&self) -> &CommitteeModel {
        &self.committee
    }

    pub fn predictions(&self) -> &[CommitteePrediction] {
        &self.predictions
    }

    pub fn match_counts(&self) -> &[usize] {
        &self.match_counts
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn pending(&self) -> Option<&QueryBatch> {
        self.pending.as_ref()
    }

    pub fn batches_done(&self) -> usize {
        self.batches_done
    }

    pub fn stop_history(&self) -> &[(usize, usize)] {
        &self.stop_history
    }

    pub fn response_times(&self) -> &[Duration] {
        &self.response_times
    }

    pub fn final_prediction(&self) -> Option<&[usize]> {
        self.final_prediction.as_deref()
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted.is_some()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.ctx.len() - self.annotations.len()
    }

    pub fn budget_remaining(&self) -> usize {
        self.config.budget.saturating_sub(self.annotations.len())
    }

    /// Appends an externally produced event (verification, observation).
    pub fn record(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    fn emit(&mut self, event: TraceEvent) {
        if self.recording {
            self.events.push(event);
        }
    }

    /// The pending batch, selecting a new one if none is pending. Empty once
    /// U or the budget is exhausted.
    pub fn next_batch(&mut self) -> QueryBatch {
        if let Some(p) = &self.pending {
            return p.clone();
        }
        let size = self.config.batch.min(self.budget_remaining());
        if self.final_prediction.is_some() || self.aborted.is_some() || size == 0 {
            return QueryBatch { index: self.batches_done + 1, items: Vec::new() };
        }
        let pool: Vec<usize> = (0..self.ctx.len()).filter(|&i| !self.annotations.contains(i)).collect();
        let p: Vec<f64> = self.predictions.iter().map(|c| c.p).collect();
        let picks = match self.config.strategy {
            Strategy::Dualloop => select_query_batch(&pool, &self.match_counts, &p, size),
            Strategy::Entropy => entropy_select_batch(&pool, &p, size),
        };
        let index = self.batches_done + 1;
        let items: Vec<QueryItem> = picks
            .into_iter()
            .map(|pair| QueryItem {
                pair,
                group: self.match_counts[pair],
                p: self.predictions[pair].p,
                predicted: self.predictions[pair].predicted,
            })
            .collect();
        let batch = QueryBatch { index, items };
        if batch.items.is_empty() {
            return batch;
        }
        self.emit(TraceEvent::Query { batch: index, pairs: batch.items.clone() });
        if let Some(t0) = self.answered_at.take() {
            let elapsed = t0.elapsed();
            self.response_times.push(elapsed);
            if self.config.scheduling == Scheduling::Concurrent {
                self.emit(TraceEvent::Timing { batch: index, response_ms: elapsed.as_secs_f64() * 1000.0 });
            }
        }
        self.pending = Some(batch.clone());
        batch
    }

    /// Records answers for exactly the pending batch and advances the loop.
    pub fn submit(&mut self, answers: &[(usize, bool)]) -> Result<()> {
        self.apply_answers(answers)?;
        self.answered_at = Some(Instant::now());
        self.boundary();
        Ok(())
    }

    fn apply_answers(&mut self, answers: &[(usize, bool)]) -> Result<()> {
        let pending = self.pending.as_ref().ok_or_else(|| Error::InvalidAnswers("no batch is pending".into()))?;
        let labels = ordered_answers(pending, answers)?;
        for &(pair, label) in &labels {
            self.annotations.insert(pair, label)?;
        }
        let batch = pending.index;
        self.pending = None;
        self.emit(TraceEvent::Annotation { batch, labels });
        Ok(())
    }

    fn boundary(&mut self) {
        let mut slow = std::mem::replace(&mut self.slow, SlowDriver::Off);
        match &mut slow {
            SlowDriver::Off => self.refit(),
            SlowDriver::Sync(slow_loop) => {
                self.refit();
                if self.slow_due() {
                    let snapshot = self.take_slow_snapshot();
                    let publication =
                        slow_loop.iterate(&self.ctx, &snapshot, &self.functions[INITIAL..], self.config.exec);
                    self.adopt(publication);
                    self.refit();
                }
            }
            SlowDriver::Concurrent(worker) => {
                if let Some(publication) = worker.poll() {
                    self.adopt(publication);
                }
                self.refit();
                if !worker.is_busy() && self.slow_due() {
                    let snapshot = self.take_slow_snapshot();
                    worker.submit(snapshot, self.functions[INITIAL..].to_vec());
                }
            }
        }
        self.slow = slow;
        self.batches_done += 1;
        self.emit_snapshot();
    }

    fn slow_due(&self) -> bool {
        let a = self.annotations.len();
        match self.last_slow_snapshot {
            None => a >= self.config.a_min(),
            Some(last) => a >= last + 2 * self.config.batch,
        }
    }

    fn take_slow_snapshot(&mut self) -> SlowSnapshot {
        self.last_slow_snapshot = Some(self.annotations.len());
        SlowSnapshot {
            annotations: self.annotations.clone(),
            committee: self.predictions.iter().map(|c| c.predicted).collect(),
            batch: self.config.batch,
        }
    }

    fn adopt(&mut self, publication: Publication) {
        self.install_tunable(publication.functions);
        let record = PublicationRecord {
            iteration: publication.iteration,
            snapshot_at: publication.snapshot_at,
            adopted_at: self.annotations.len(),
            trained: publication.trained,
            relaxed: publication.relaxed,
            thresholds: publication.thresholds,
        };
        self.emit(TraceEvent::Publication(record));
    }

    fn install_tunable(&mut self, functions: Vec<FunctionVotes>) {
        self.functions.truncate(INITIAL);
        self.functions.extend(functions);
        self.match_counts = match_vote_counts(&self.functions, self.ctx.len());
    }

    fn refit(&mut self) {
        self.committee =
            CommitteeModel::fit(&self.functions, &self.annotations, self.config.ensemble, self.config.a_min());
        self.predictions = self.committee.predict_all(&self.functions, self.ctx.len(), self.config.exec);
    }

    /// Unannotated pairs the committee currently predicts as matches.
    pub fn predicted_unlabeled(&self) -> Vec<usize> {
        self.predictions.iter().filter(|c| c.predicted && !self.annotations.contains(c.pair)).map(|c| c.pair).collect()
    }

    fn record_stop_indicator(&mut self) -> (Vec<usize>, usize) {
        let predicted = self.predicted_unlabeled();
        let indicator = self.annotations.matches() + predicted.len();
        self.stop_history.push((self.batches_done, indicator));
        (predicted, indicator)
    }

    fn emit_snapshot(&mut self) {
        let (predicted, stop_indicator) = self.record_stop_indicator();
        let record = SnapshotRecord {
            batch: self.batches_done,
            annotated: self.annotations.len(),
            annotated_matches: self.annotations.matches(),
            mode: self.committee.mode,
            members: self
                .committee
                .members
                .iter()
                .map(|m| MemberRecord { id: m.id.clone(), weight: m.weight })
                .collect(),
            predicted,
            stop_indicator,
        };
        self.emit(TraceEvent::Snapshot(record));
    }

    fn compute_final(&self) -> Vec<usize> {
        let mut out: Vec<&CommitteePrediction> =
            self.predictions.iter().filter(|c| c.predicted && !self.annotations.contains(c.pair)).collect();
        out.sort_by(|a, b| b.p.total_cmp(&a.p).then(a.pair.cmp(&b.pair)));
        out.into_iter().map(|c| c.pair).collect()
    }

    /// Stops querying and returns the verification workload: every
    /// unannotated pair predicted as a match, by descending p.
    pub fn finish(&mut self) -> Vec<usize> {
        if let Some(done) = &self.final_prediction {
            return done.clone();
        }
        self.pending = None;
        let predicted = self.compute_final();
        let annotated_matches = self.annotations.matches();
        self.emit(TraceEvent::Final {
            predicted: predicted.clone(),
            annotated: self.annotations.len(),
            annotated_matches,
            cost: self.annotations.len() + predicted.len(),
        });
        self.final_prediction = Some(predicted.clone());
        predicted
    }

    pub fn abort(&mut self, reason: String) {
        log::error!("run aborted: {reason}");
        self.emit(TraceEvent::Aborted { reason: reason.clone(), annotated: self.annotations.len() });
        self.aborted = Some(reason);
        self.pending = None;
    }

    /// Waits for an in-flight background iteration and adopts it.
    pub fn drain_slow_loop(&mut self) {
        if let SlowDriver::Concurrent(worker) = &mut self.slow {
            if let Some(publication) = worker.wait() {
                self.adopt(publication);
                self.refit();
            }
        }
    }

    pub fn into_outcome(self) -> RunOutcome {
        RunOutcome {
            final_prediction: self.final_prediction.clone().unwrap_or_default(),
            events: self.events,
            annotations: self.annotations,
            response_times: self.response_times,
            aborted: self.aborted,
        }
    }
}

/// Answers reordered to the batch order; rejects missing, extra, repeated
/// or foreign pairs.
fn ordered_answers(pending: &QueryBatch, answers: &[(usize, bool)]) -> Result<Vec<(usize, bool)>> {
    let mut by_pair = std::collections::HashMap::with_capacity(answers.len());
    for &(pair, label) in answers {
        if !pending.items.iter().any(|q| q.pair == pair) {
            return Err(Error::InvalidAnswers(format!("pair {pair} is not in batch {}", pending.index)));
        }
        if by_pair.insert(pair, label).is_some() {
            return Err(Error::InvalidAnswers(format!("pair {pair} answered twice")));
        }
    }
    pending
        .items
        .iter()
        .map(|q| {
            by_pair
                .get(&q.pair)
                .map(|&l| (q.pair, l))
                .ok_or_else(|| Error::InvalidAnswers(format!("pair {} is unanswered", q.pair)))
        })
        .collect()
}
