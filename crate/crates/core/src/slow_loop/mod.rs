//! Threshold tuning for the tunable labeling functions, with scorer
//! retraining and the δ relaxation of each metric's ceiling.

pub mod scorers;

use serde::{Deserialize, Serialize};

use crate::context::TaskContext;
use crate::exec::Exec;
use crate::features::FixedMetric;
use crate::labeling::{AnnotationStore, FunctionVotes, MetricId};
use scorers::{row, scorer_seed, trainable, MatchScorer, Row, ScorerConfig, ScorerKind};

pub const DEFAULT_DELTA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlowLoopConfig {
    pub delta: f64,
    pub scorers: ScorerConfig,
}

impl Default for SlowLoopConfig {
    fn default() -> Self {
        SlowLoopConfig { delta: DEFAULT_DELTA, scorers: ScorerConfig::default() }
    }
}

/// Distance values of one metric over every candidate.
pub fn metric_values(ctx: &TaskContext, metric: MetricId, models: &[Option<MatchScorer>; 4], exec: Exec) -> Vec<f64> {
    match metric {
        MetricId::Embedding(m) => ctx.features.iter().map(|f| f.get(m)).collect(),
        MetricId::Scorer(kind) => match &models[kind as usize] {
            None => vec![1.0; ctx.len()],
            Some(model) => exec.map(&ctx.features, |f| model.no_match_probability(&row(f))),
        },
    }
}

/// Trains all four scorers on A, or none when A lacks a class.
pub fn train_scorers(
    ctx: &TaskContext,
    annotations: &AnnotationStore,
    config: &ScorerConfig,
    seed: u64,
    exec: Exec,
) -> [Option<MatchScorer>; 4] {
    let labels: Vec<bool> = annotations.entries().iter().map(|&(_, l)| l).collect();
    if !trainable(&labels) {
        return [None, None, None, None];
    }
    let x: Vec<Row> = annotations.entries().iter().map(|&(i, _)| row(&ctx.features[i])).collect();
    let at = annotations.len();
    let fitted =
        exec.map(&ScorerKind::ALL, |&kind| MatchScorer::fit(kind, &x, &labels, config, scorer_seed(seed, at, kind)));
    let mut it = fitted.into_iter().map(Some);
    std::array::from_fn(|_| it.next().flatten())
}

/// Value of the threshold objective, kept separately for the oracles.
pub fn threshold_objective(tp_a: usize, agree_cmt: usize, fp_cmt: usize, batch: usize) -> f64 {
    let votes = agree_cmt + fp_cmt;
    let prec = if votes == 0 { 0.0 } else { agree_cmt as f64 / votes as f64 };
    let b = batch as f64;
    tp_a as f64 + prec + b / (fp_cmt as f64).max(b)
}

/// Best threshold h ≤ `h_max` for one metric. Candidates are 0 and every
/// observed value up to `h_max`; ties go to the smaller h.
///
/// `committee` holds the committee's predicted label for each candidate and
/// is consulted only on unannotated pairs.
pub fn tune_threshold(
    values: &[f64],
    h_max: f64,
    annotations: &AnnotationStore,
    committee: &[bool],
    batch: usize,
) -> f64 {
    let mut admitted: Vec<usize> = (0..values.len()).filter(|&i| values[i] <= h_max).collect();
    admitted.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let (mut tp_a, mut agree, mut fp) = (0, 0, 0);
    let mut at = 0;
    let consume = |h: f64, at: &mut usize, tp_a: &mut usize, agree: &mut usize, fp: &mut usize| {
        while *at < admitted.len() && values[admitted[*at]] <= h {
            let i = admitted[*at];
            match annotations.label(i) {
                Some(true) => *tp_a += 1,
                Some(false) => {}
                None if committee[i] => *agree += 1,
                None => *fp += 1,
            }
            *at += 1;
        }
    };
    consume(0.0, &mut at, &mut tp_a, &mut agree, &mut fp);
    let mut best_h = 0.0;
    let mut best = threshold_objective(tp_a, agree, fp, batch);
    while at < admitted.len() {
        let h = values[admitted[at]];
        consume(h, &mut at, &mut tp_a, &mut agree, &mut fp);
        let obj = threshold_objective(tp_a, agree, fp, batch);
        if obj > best {
            best = obj;
            best_h = h;
        }
    }
    best_h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricThreshold {
    pub metric: MetricId,
    pub h: f64,
    pub h_max: f64,
}

/// Per-metric ceilings and thresholds. Ceilings are kept as relaxation
/// counts so that h_max is always an exact multiple of δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub delta: f64,
    pub relaxations: [u32; 10],
    pub thresholds: [f64; 10],
}

impl ThresholdState {
    pub fn new(delta: f64) -> Self {
        ThresholdState { delta, relaxations: [0; 10], thresholds: [0.0; 10] }
    }

    pub fn h_max(&self, slot: usize) -> f64 {
        self.relaxations[slot] as f64 * self.delta
    }

    /// Raises every ceiling by δ when the committee predicts no match in U.
    pub fn maybe_relax(&mut self, committee_predicts_match: bool) -> bool {
        if committee_predicts_match {
            return false;
        }
        for r in &mut self.relaxations {
            *r += 1;
        }
        true
    }

    pub fn snapshot(&self) -> Vec<MetricThreshold> {
        MetricId::ALL
            .iter()
            .enumerate()
            .map(|(i, &metric)| MetricThreshold { metric, h: self.thresholds[i], h_max: self.h_max(i) })
            .collect()
    }
}

/// What the slow loop reads at iteration start.
#[derive(Debug, Clone)]
pub struct SlowSnapshot {
    pub annotations: AnnotationStore,
    /// Committee label per candidate at snapshot time.
    pub committee: Vec<bool>,
    pub batch: usize,
}

impl SlowSnapshot {
    pub fn committee_predicts_match(&self) -> bool {
        self.committee.iter().enumerate().any(|(i, &c)| c && !self.annotations.contains(i))
    }
}

/// One atomic replacement of the ten tunable functions.
#[derive(Debug, Clone)]
pub struct Publication {
    pub iteration: usize,
    pub snapshot_at: usize,
    pub trained: bool,
    pub relaxed: bool,
    pub thresholds: Vec<MetricThreshold>,
    pub functions: Vec<FunctionVotes>,
}

/// The ten λ_{d,0} functions present before the first iteration.
pub fn initial_tunable_functions(ctx: &TaskContext) -> Vec<FunctionVotes> {
    let none = [None, None, None, None];
    MetricId::ALL
        .iter()
        .map(|&m| FunctionVotes::tunable(m, 0.0, &metric_values(ctx, m, &none, Exec::Sequential)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SlowLoop {
    pub config: SlowLoopConfig,
    pub state: ThresholdState,
    pub seed: u64,
    pub iterations: usize,
}

impl SlowLoop {
    pub fn new(config: SlowLoopConfig, seed: u64) -> Self {
        SlowLoop { state: ThresholdState::new(config.delta), config, seed, iterations: 0 }
    }

    /// One iteration: retrain, relax, tune every metric, publish.
    /// `previous` holds the current tunable functions, kept for any metric
    /// whose values come out non-finite.
    pub fn iterate(
        &mut self,
        ctx: &TaskContext,
        snapshot: &SlowSnapshot,
        previous: &[FunctionVotes],
        exec: Exec,
    ) -> Publication {
        let models = train_scorers(ctx, &snapshot.annotations, &self.config.scorers, self.seed, exec);
        let trained = models.iter().all(Option::is_some);
        let relaxed = self.state.maybe_relax(snapshot.committee_predicts_match());
        let state = &self.state;
        let tuned = exec.map_range(MetricId::ALL.len(), |slot| {
            let metric = MetricId::ALL[slot];
            let values = metric_values(ctx, metric, &models, Exec::Sequential);
            if values.iter().any(|v| !v.is_finite()) {
                log::warn!("metric {metric} produced non-finite values; keeping previous function");
                return None;
            }
            let h =
                tune_threshold(&values, state.h_max(slot), &snapshot.annotations, &snapshot.committee, snapshot.batch);
            Some((h, FunctionVotes::tunable(metric, h, &values)))
        });
        let mut functions = Vec::with_capacity(MetricId::ALL.len());
        for (slot, result) in tuned.into_iter().enumerate() {
            match result {
                Some((h, f)) => {
                    self.state.thresholds[slot] = h;
                    functions.push(f);
                }
                None => functions.push(previous[slot].clone()),
            }
        }
        self.iterations += 1;
        Publication {
            iteration: self.iterations,
            snapshot_at: snapshot.annotations.len(),
            trained,
            relaxed,
            thresholds: self.state.snapshot(),
            functions,
        }
    }
}

/// Rebuilds a recorded publication from the A prefix it was tuned on.
pub fn replay_publication(
    ctx: &TaskContext,
    annotations: &AnnotationStore,
    thresholds: &[MetricThreshold],
    config: &SlowLoopConfig,
    seed: u64,
    exec: Exec,
) -> Vec<FunctionVotes> {
    let models = train_scorers(ctx, annotations, &config.scorers, seed, exec);
    thresholds
        .iter()
        .map(|t| FunctionVotes::tunable(t.metric, t.h, &metric_values(ctx, t.metric, &models, exec)))
        .collect()
}

pub fn embedding_metric_ids() -> impl Iterator<Item = MetricId> {
    FixedMetric::EMBEDDING.into_iter().map(MetricId::Embedding)
}
