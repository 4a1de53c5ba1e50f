//! Weak labels, the labeling-function family and per-function scoring
//! against the annotated set.

pub mod annotations;
pub mod initial;
pub mod lexicon;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use annotations::AnnotationStore;
pub use initial::{evaluate_initial_lf, profile_schema, ClassProfile, InitialLf, PairView};
pub use lexicon::SynonymLexicon;

use crate::error::{Error, Result};
use crate::features::FixedMetric;
use crate::slow_loop::scorers::ScorerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
#[repr(i8)]
pub enum WeakLabel {
    Abstain = -1,
    NoMatch = 0,
    Match = 1,
}

impl From<WeakLabel> for i8 {
    fn from(l: WeakLabel) -> i8 {
        l as i8
    }
}

impl TryFrom<i8> for WeakLabel {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(WeakLabel::Abstain),
            0 => Ok(WeakLabel::NoMatch),
            1 => Ok(WeakLabel::Match),
            other => Err(format!("weak label must be -1, 0 or 1, got {other}")),
        }
    }
}

impl WeakLabel {
    pub fn from_bool(matched: bool) -> Self {
        if matched {
            WeakLabel::Match
        } else {
            WeakLabel::NoMatch
        }
    }
}

/// A distance metric usable by a tunable labeling function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MetricId {
    Embedding(FixedMetric),
    Scorer(ScorerKind),
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::Embedding(FixedMetric::EmbNameA),
        MetricId::Embedding(FixedMetric::EmbNameB),
        MetricId::Embedding(FixedMetric::EmbLabelA),
        MetricId::Embedding(FixedMetric::EmbLabelB),
        MetricId::Embedding(FixedMetric::EmbCommentA),
        MetricId::Embedding(FixedMetric::EmbCommentB),
        MetricId::Scorer(ScorerKind::RandomForest),
        MetricId::Scorer(ScorerKind::GradientBoostedTrees),
        MetricId::Scorer(ScorerKind::LogisticRegression),
        MetricId::Scorer(ScorerKind::MultilayerPerceptron),
    ];

    pub fn id(self) -> &'static str {
        match self {
            MetricId::Embedding(m) => m.id(),
            MetricId::Scorer(s) => s.id(),
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.id() == id).ok_or_else(|| Error::Config(format!("unknown metric `{id}`")))
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl From<MetricId> for String {
    fn from(m: MetricId) -> String {
        m.id().to_string()
    }
}

impl TryFrom<String> for MetricId {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        MetricId::from_id(&s).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelingFunction {
    Initial { lf: InitialLf },
    Tunable { metric: MetricId, threshold: f64 },
}

impl LabelingFunction {
    pub fn id(&self) -> String {
        match self {
            LabelingFunction::Initial { lf } => lf.id().to_string(),
            LabelingFunction::Tunable { metric, .. } => format!("LF_tunable_{}", metric.id()),
        }
    }

    pub fn is_tunable(&self) -> bool {
        matches!(self, LabelingFunction::Tunable { .. })
    }
}

/// 1 iff `distance <= threshold`; tunable functions never abstain.
pub fn tunable_vote(distance: f64, threshold: f64) -> WeakLabel {
    WeakLabel::from_bool(distance <= threshold)
}

/// Vote of a tunable function on one pair; the metric value must exist.
pub fn evaluate_tunable_lf(metric: MetricId, threshold: f64, value: Option<f64>, pair: usize) -> Result<WeakLabel> {
    match value {
        Some(d) if d.is_finite() => Ok(tunable_vote(d, threshold)),
        _ => Err(Error::MetricUnavailable { metric: metric.id().to_string(), pair }),
    }
}

/// A labeling function together with its votes over every candidate.
#[derive(Debug, Clone)]
pub struct FunctionVotes {
    pub function: LabelingFunction,
    pub id: String,
    pub votes: Arc<Vec<WeakLabel>>,
}

impl FunctionVotes {
    pub fn new(function: LabelingFunction, votes: Vec<WeakLabel>) -> Self {
        FunctionVotes { id: function.id(), function, votes: Arc::new(votes) }
    }

    pub fn tunable(metric: MetricId, threshold: f64, values: &[f64]) -> Self {
        let votes = values.iter().map(|&d| tunable_vote(d, threshold)).collect();
        Self::new(LabelingFunction::Tunable { metric, threshold }, votes)
    }

    /// (match, no-match, abstain) counts.
    pub fn coverage(&self) -> (usize, usize, usize) {
        self.votes.iter().fold((0, 0, 0), |(m, n, a), v| match v {
            WeakLabel::Match => (m + 1, n, a),
            WeakLabel::NoMatch => (m, n + 1, a),
            WeakLabel::Abstain => (m, n, a + 1),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BinaryScores {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BinaryScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        BinaryScores { tp, fp, fn_, precision, recall, f1 }
    }
}

/// Precision, recall and F1 of one function on A; abstentions are ignored.
pub fn lf_scores_on_annotations(votes: &[WeakLabel], annotations: &AnnotationStore) -> BinaryScores {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for &(pair, label) in annotations.entries() {
        match (votes[pair], label) {
            (WeakLabel::Match, true) => tp += 1,
            (WeakLabel::Match, false) => fp += 1,
            (WeakLabel::NoMatch, true) => fn_ += 1,
            _ => {}
        }
    }
    BinaryScores::from_counts(tp, fp, fn_)
}
