//! Evaluation curves computed from a trace alone.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::committee::EnsembleMode;
use crate::error::{Error, Result};
use crate::fast_loop::{ResponseStats, Strategy};
use crate::trace::{run_start, SnapshotRecord, TraceEvent};

pub const RECALL_LEVELS: [f64; 4] = [0.70, 0.80, 0.90, 0.98];
/// Budget fractions 0, 2%, ..., 100%.
pub const F1_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Point {
    pub budget_fraction: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub batch: usize,
    pub cost: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallCost {
    pub level: f64,
    /// `None` when the level is never reached.
    pub cost: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task: String,
    pub candidates: usize,
    pub budget: usize,
    pub batch: usize,
    pub strategy: Strategy,
    pub ensemble: EnsembleMode,
    pub slow_loop: bool,
    pub seed: u64,
    pub truth_total: usize,
    pub truth_retained: usize,
    pub annotated: usize,
    pub annotated_matches: usize,
    pub f1_curve: Vec<F1Point>,
    pub recall_curve: Vec<CostPoint>,
    pub cost_to_recall: Vec<RecallCost>,
    pub final_cost: Option<usize>,
    pub final_recall: Option<f64>,
    pub publications: usize,
    pub response: ResponseStats,
    pub aborted: Option<String>,
}

/// Annotation labels in arrival order.
fn annotation_sequence(events: &[TraceEvent]) -> Vec<(usize, bool)> {
    events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Annotation { labels, .. } => Some(labels.iter().copied()),
            _ => None,
        })
        .flatten()
        .collect()
}

fn snapshots(events: &[TraceEvent]) -> Vec<&SnapshotRecord> {
    events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Snapshot(s) => Some(s),
            _ => None,
        })
        .collect()
}

/// Positive set at a snapshot: annotated matches plus predictions.
fn confusion(
    annotations: &[(usize, bool)],
    predicted: &[usize],
    truth: &HashSet<usize>,
    truth_total: usize,
) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut positives = 0;
    for &(pair, label) in annotations {
        if label {
            positives += 1;
            tp += truth.contains(&pair) as usize;
        }
    }
    for &pair in predicted {
        positives += 1;
        tp += truth.contains(&pair) as usize;
    }
    (tp, positives - tp, truth_total.saturating_sub(tp))
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

fn recall(tp: usize, truth_total: usize) -> f64 {
    if truth_total == 0 {
        0.0
    } else {
        tp as f64 / truth_total as f64
    }
}

/// F1 over the whole candidate set at each budget fraction: annotated
/// pairs carry their label, the rest the committee prediction of the latest
/// snapshot taken within that fraction of the budget.
pub fn compute_f1_curve(events: &[TraceEvent], fractions: &[f64]) -> Result<Vec<F1Point>> {
    let start = run_start(events)?;
    let truth: HashSet<usize> = start.truth.iter().copied().collect();
    let labels = annotation_sequence(events);
    let snaps = snapshots(events);
    if snaps.is_empty() {
        return Err(Error::Trace("trace has no committee snapshots".into()));
    }
    let budget = start.config.budget as f64;
    Ok(fractions
        .iter()
        .map(|&fraction| {
            let limit = (fraction * budget + 1e-9).floor() as usize;
            let snap = snaps.iter().rev().find(|s| s.annotated <= limit).unwrap_or(&snaps[0]);
            let (tp, fp, fn_) = confusion(&labels[..snap.annotated], &snap.predicted, &truth, start.truth_total);
            F1Point { budget_fraction: fraction, f1: f1(tp, fp, fn_) }
        })
        .collect())
}

pub fn default_fractions() -> Vec<f64> {
    (0..=F1_STEPS).map(|i| i as f64 / F1_STEPS as f64).collect()
}

/// Cost |A| + |predicted| and recall at every batch boundary.
pub fn compute_recall_vs_cost(events: &[TraceEvent]) -> Result<Vec<CostPoint>> {
    let start = run_start(events)?;
    let truth: HashSet<usize> = start.truth.iter().copied().collect();
    let labels = annotation_sequence(events);
    Ok(snapshots(events)
        .into_iter()
        .map(|s| {
            let (tp, _, _) = confusion(&labels[..s.annotated], &s.predicted, &truth, start.truth_total);
            CostPoint { batch: s.batch, cost: s.annotated + s.predicted.len(), recall: recall(tp, start.truth_total) }
        })
        .collect())
}

/// Minimal cost at which recall reaches each level.
pub fn cost_to_reach_recall(curve: &[CostPoint], levels: &[f64]) -> Vec<RecallCost> {
    levels
        .iter()
        .map(|&level| RecallCost {
            level,
            cost: curve.iter().filter(|p| p.recall + 1e-12 >= level).map(|p| p.cost).min(),
        })
        .collect()
}

/// Best recall among points costing at most `limit`.
pub fn recall_at_cost(curve: &[CostPoint], limit: usize) -> f64 {
    curve.iter().filter(|p| p.cost <= limit).map(|p| p.recall).fold(0.0, f64::max)
}

pub fn evaluate_trace(events: &[TraceEvent]) -> Result<EvaluationReport> {
    let start = run_start(events)?;
    let f1_curve = compute_f1_curve(events, &default_fractions())?;
    let recall_curve = compute_recall_vs_cost(events)?;
    let cost_to_recall = cost_to_reach_recall(&recall_curve, &RECALL_LEVELS);
    let labels = annotation_sequence(events);
    let truth: HashSet<usize> = start.truth.iter().copied().collect();
    let mut report = EvaluationReport {
        task: start.task.clone(),
        candidates: start.candidates,
        budget: start.config.budget,
        batch: start.config.batch,
        strategy: start.config.strategy,
        ensemble: start.config.ensemble,
        slow_loop: start.config.slow_loop,
        seed: start.config.seed,
        truth_total: start.truth_total,
        truth_retained: start.truth.len(),
        annotated: labels.len(),
        annotated_matches: labels.iter().filter(|(_, l)| *l).count(),
        f1_curve,
        recall_curve,
        cost_to_recall,
        final_cost: None,
        final_recall: None,
        publications: 0,
        response: ResponseStats::default(),
        aborted: None,
    };
    let mut timings = Vec::new();
    for e in events {
        match e {
            TraceEvent::Final { predicted, cost, .. } => {
                let (tp, _, _) = confusion(&labels, predicted, &truth, start.truth_total);
                report.final_cost = Some(*cost);
                report.final_recall = Some(recall(tp, start.truth_total));
            }
            TraceEvent::Publication(_) => report.publications += 1,
            TraceEvent::Timing { response_ms, .. } => {
                timings.push(std::time::Duration::from_secs_f64(response_ms / 1000.0))
            }
            TraceEvent::Aborted { reason, .. } => report.aborted = Some(reason.clone()),
            _ => {}
        }
    }
    report.response = ResponseStats::from_samples(&timings);
    Ok(report)
}

/// Mean with a normal-approximation 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub ci95: f64,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    if n == 0 {
        return Aggregate { n, mean: f64::NAN, ci95: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Aggregate { n, mean, ci95: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Aggregate { n, mean, ci95: 1.96 * (var / n as f64).sqrt() }
}
