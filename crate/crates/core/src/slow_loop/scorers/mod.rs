//! Probabilistic match scorers trained on A. Each one predicts the
//! probability that a pair is *not* a match, which then serves as a distance.

mod boosting;
mod forest;
mod logistic;
mod mlp;
pub mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use boosting::BoostedTrees;
pub use forest::RandomForest;
pub use logistic::LogisticRegression;
pub use mlp::Mlp;

use crate::features::FeatureVector;

pub const FEATURES: usize = 9;
pub type Row = [f64; FEATURES];

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    RandomForest,
    GradientBoostedTrees,
    LogisticRegression,
    MultilayerPerceptron,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 4] = [
        ScorerKind::RandomForest,
        ScorerKind::GradientBoostedTrees,
        ScorerKind::LogisticRegression,
        ScorerKind::MultilayerPerceptron,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ScorerKind::RandomForest => "scorer-rf",
            ScorerKind::GradientBoostedTrees => "scorer-gbt",
            ScorerKind::LogisticRegression => "scorer-lr",
            ScorerKind::MultilayerPerceptron => "scorer-mlp",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub forest_trees: usize,
    pub forest_depth: usize,
    pub boosting_rounds: usize,
    pub boosting_depth: usize,
    pub boosting_rate: f64,
    pub logistic_ridge: f64,
    pub logistic_iterations: usize,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_rate: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            forest_trees: 50,
            forest_depth: 8,
            boosting_rounds: 50,
            boosting_depth: 3,
            boosting_rate: 0.1,
            logistic_ridge: 1e-2,
            logistic_iterations: 30,
            mlp_hidden: 16,
            mlp_epochs: 200,
            mlp_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub enum MatchScorer {
    RandomForest(RandomForest),
    GradientBoostedTrees(BoostedTrees),
    LogisticRegression(LogisticRegression),
    MultilayerPerceptron(Mlp),
}

impl MatchScorer {
    /// Fits `kind` from scratch. The caller guarantees both labels occur.
    pub fn fit(kind: ScorerKind, x: &[Row], y: &[bool], config: &ScorerConfig, seed: u64) -> Self {
        match kind {
            ScorerKind::RandomForest => {
                MatchScorer::RandomForest(RandomForest::fit(x, y, config.forest_trees, config.forest_depth, seed))
            }
            ScorerKind::GradientBoostedTrees => MatchScorer::GradientBoostedTrees(BoostedTrees::fit(
                x,
                y,
                config.boosting_rounds,
                config.boosting_depth,
                config.boosting_rate,
                seed,
            )),
            ScorerKind::LogisticRegression => MatchScorer::LogisticRegression(LogisticRegression::fit(
                x,
                y,
                config.logistic_ridge,
                config.logistic_iterations,
            )),
            ScorerKind::MultilayerPerceptron => MatchScorer::MultilayerPerceptron(Mlp::fit(
                x,
                y,
                config.mlp_hidden,
                config.mlp_epochs,
                config.mlp_rate,
                seed,
            )),
        }
    }

    pub fn no_match_probability(&self, x: &Row) -> f64 {
        let p = match self {
            MatchScorer::RandomForest(m) => m.match_probability(x),
            MatchScorer::GradientBoostedTrees(m) => m.match_probability(x),
            MatchScorer::LogisticRegression(m) => m.match_probability(x),
            MatchScorer::MultilayerPerceptron(m) => m.match_probability(x),
        };
        (1.0 - p).clamp(0.0, 1.0)
    }
}

pub fn row(features: &FeatureVector) -> Row {
    features.0
}

/// Whether `labels` contains both classes, the precondition for training.
pub fn trainable(labels: &[bool]) -> bool {
    labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)
}

/// Training seed per scorer, derived from the run seed and |A| at the snapshot.
pub fn scorer_seed(run_seed: u64, snapshot_at: usize, kind: ScorerKind) -> u64 {
    let mut z = run_seed
        ^ (snapshot_at as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (kind as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Row>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            let mut r = [0.5; FEATURES];
            let m = i < 4;
            r[0] = if m { 0.05 + 0.02 * i as f64 } else { 0.6 + 0.03 * i as f64 };
            r[6] = if m { 0.1 } else { 0.7 };
            x.push(r);
            y.push(m);
        }
        (x, y)
    }

    #[test]
    fn logistic_separates_toy_data() {
        let (x, y) = separable();
        let m = MatchScorer::fit(ScorerKind::LogisticRegression, &x, &y, &ScorerConfig::default(), 0);
        let correct = x.iter().zip(&y).filter(|(r, &l)| (m.no_match_probability(r) < 0.5) == l).count();
        assert_eq!(correct, 10);
    }

    #[test]
    fn all_kinds_learn_and_stay_in_range() {
        let (x, y) = separable();
        for kind in ScorerKind::ALL {
            let m = MatchScorer::fit(kind, &x, &y, &ScorerConfig::default(), 7);
            for (r, &l) in x.iter().zip(&y) {
                let d = m.no_match_probability(r);
                assert!((0.0..=1.0).contains(&d));
                assert_eq!(d < 0.5, l, "{kind}");
            }
        }
    }

    #[test]
    fn retraining_is_deterministic() {
        let (x, y) = separable();
        for kind in ScorerKind::ALL {
            let a = MatchScorer::fit(kind, &x, &y, &ScorerConfig::default(), 11);
            let b = MatchScorer::fit(kind, &x, &y, &ScorerConfig::default(), 11);
            let probe = [0.3; FEATURES];
            assert_eq!(a.no_match_probability(&probe).to_bits(), b.no_match_probability(&probe).to_bits());
        }
    }

    #[test]
    fn trainable_needs_both_classes() {
        assert!(!trainable(&[false, false]));
        assert!(!trainable(&[]));
        assert!(trainable(&[false, true]));
    }
}
