//! The query loop: batch selection, oracle round trips, committee refits and
//! adoption of slow-loop publications at batch boundaries.

mod engine;
mod worker;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use engine::{Engine, QueryBatch, RunOutcome};

use crate::committee::EnsembleMode;
use crate::context::TaskContext;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::harness::oracle::Oracle;
use crate::labeling::{FunctionVotes, WeakLabel};
use crate::slow_loop::SlowLoopConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Dualloop,
    Entropy,
}

/// How the slow loop is scheduled relative to the fast loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduling {
    /// Synchronously at each trigger point; traces are reproducible.
    #[default]
    Deterministic,
    /// On a background thread; publications are adopted when ready.
    Concurrent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FastLoopConfig {
    pub batch: usize,
    pub budget: usize,
    /// Annotations needed before the committee is curated; defaults to `batch`.
    pub a_min: Option<usize>,
    pub strategy: Strategy,
    pub ensemble: EnsembleMode,
    pub slow_loop: bool,
    pub scheduling: Scheduling,
    pub seed: u64,
    pub slow: SlowLoopConfig,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for FastLoopConfig {
    fn default() -> Self {
        FastLoopConfig {
            batch: 10,
            budget: 100,
            a_min: None,
            strategy: Strategy::Dualloop,
            ensemble: EnsembleMode::Curated,
            slow_loop: true,
            scheduling: Scheduling::Deterministic,
            seed: 0,
            slow: SlowLoopConfig::default(),
            exec: Exec::default(),
        }
    }
}

/// Equality ignores `exec`: the execution policy never changes results.
impl PartialEq for FastLoopConfig {
    fn eq(&self, other: &Self) -> bool {
        self.batch == other.batch
            && self.budget == other.budget
            && self.a_min == other.a_min
            && self.strategy == other.strategy
            && self.ensemble == other.ensemble
            && self.slow_loop == other.slow_loop
            && self.scheduling == other.scheduling
            && self.seed == other.seed
            && self.slow == other.slow
    }
}

impl FastLoopConfig {
    pub fn a_min(&self) -> usize {
        self.a_min.unwrap_or(self.batch).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.budget < self.batch {
            return Err(Error::Config(format!("budget {} is below the batch size {}", self.budget, self.batch)));
        }
        if !(self.slow.delta > 0.0 && self.slow.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.slow.delta)));
        }
        Ok(())
    }
}

/// Number of functions voting 1 on each candidate.
pub fn match_vote_counts(functions: &[FunctionVotes], candidates: usize) -> Vec<usize> {
    let mut counts = vec![0; candidates];
    for f in functions {
        for (c, v) in counts.iter_mut().zip(f.votes.iter()) {
            if *v == WeakLabel::Match {
                *c += 1;
            }
        }
    }
    counts
}

/// `pool` grouped by match-vote count, groups in ascending key order.
pub fn group_by_match_votes(counts: &[usize], pool: &[usize]) -> std::collections::BTreeMap<usize, Vec<usize>> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for &u in pool {
        groups.entry(counts[u]).or_default().push(u);
    }
    groups
}

fn top_b<F>(pool: &[usize], b: usize, cmp: F) -> Vec<usize>
where
    F: Fn(&usize, &usize) -> std::cmp::Ordering,
{
    let mut items = pool.to_vec();
    let b = b.min(items.len());
    if b == 0 {
        return Vec::new();
    }
    if b < items.len() {
        items.select_nth_unstable_by(b - 1, &cmp);
        items.truncate(b);
    }
    items.sort_by(&cmp);
    items
}

/// Scores within about 1e-12 of each other are equal for selection, so that
/// mathematically tied pairs (p and 1 - p, or one vote sum in two orders)
/// fall back to pair order instead of rounding noise.
fn score_key(x: f64) -> i64 {
    (x * (1u64 << 40) as f64).round() as i64
}

/// B picks from the highest nonempty vote group, most certain first, ties
/// by pair index. Picks are removed from the pool; nothing is refitted in
/// between, so the sequence equals one sort.
pub fn select_query_batch(pool: &[usize], counts: &[usize], p: &[f64], b: usize) -> Vec<usize> {
    top_b(pool, b, |&x, &y| counts[y].cmp(&counts[x]).then(score_key(p[y]).cmp(&score_key(p[x]))).then(x.cmp(&y)))
}

/// B picks with the highest binary entropy of p, i.e. p closest to 0.5,
/// ties by pair index.
pub fn entropy_select_batch(pool: &[usize], p: &[f64], b: usize) -> Vec<usize> {
    let closeness = |u: usize| score_key(p[u].min(1.0 - p[u]));
    top_b(pool, b, |&x, &y| closeness(y).cmp(&closeness(x)).then(x.cmp(&y)))
}

/// Runs the loop to budget exhaustion against `oracle`. An oracle failure
/// ends the run with an `aborted` event instead of an error.
pub fn run_fast_loop(
    ctx: std::sync::Arc<TaskContext>,
    oracle: &mut dyn Oracle,
    config: FastLoopConfig,
) -> Result<RunOutcome> {
    let mut engine = Engine::new(ctx.clone(), config)?;
    loop {
        let batch = engine.next_batch();
        if batch.items.is_empty() {
            break;
        }
        let pairs = batch.pairs();
        match oracle.answer(&ctx, &pairs) {
            Ok(labels) if labels.len() == pairs.len() => {
                let answers: Vec<(usize, bool)> = pairs.into_iter().zip(labels).collect();
                engine.submit(&answers)?;
            }
            Ok(labels) => {
                engine.abort(format!("oracle returned {} answers for {} pairs", labels.len(), pairs.len()));
                return Ok(engine.into_outcome());
            }
            Err(e) => {
                engine.abort(e.to_string());
                return Ok(engine.into_outcome());
            }
        }
    }
    engine.finish();
    Ok(engine.into_outcome())
}

/// Summary statistics of response times, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseStats {
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    pub p95: f64,
}

impl ResponseStats {
    pub fn from_samples(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return ResponseStats::default();
        }
        let mut secs: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
        secs.sort_by(f64::total_cmp);
        let rank = ((0.95 * secs.len() as f64).ceil() as usize).clamp(1, secs.len());
        ResponseStats {
            count: secs.len(),
            mean: secs.iter().sum::<f64>() / secs.len() as f64,
            max: secs[secs.len() - 1],
            p95: secs[rank - 1],
        }
    }
}
