//! The voting committee: F1-prefix curation, precision weights and the
//! weighted-vote prediction model.

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::labeling::{lf_scores_on_annotations, AnnotationStore, BinaryScores, FunctionVotes, WeakLabel};

pub const BASE_WEIGHT: f64 = 0.7;
pub const ZERO_PRECISION_WEIGHT: f64 = 0.01;
pub const DECISION_THRESHOLD: f64 = 0.5;
pub const MIN_COMMITTEE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitteeMode {
    Uniform,
    Curated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// F1-prefix selection with precision weights once enough labels exist.
    #[default]
    Curated,
    /// Every function with the same weight for the whole run.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    /// Position of the function in Λ at fit time.
    pub index: usize,
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitteeModel {
    pub mode: CommitteeMode,
    pub members: Vec<Member>,
    pub threshold: f64,
    pub fitted_from: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitteePrediction {
    pub pair: usize,
    pub predicted: bool,
    pub p: f64,
    pub match_votes: usize,
    pub all_abstain: bool,
}

pub fn weight_for_precision(precision: f64) -> f64 {
    if precision > 0.0 {
        BASE_WEIGHT * precision
    } else {
        ZERO_PRECISION_WEIGHT
    }
}

/// Weighted vote over `(weight, vote)` pairs. Returns `(p, match_votes, all_abstain)`.
pub fn weighted_vote(votes: impl IntoIterator<Item = (f64, WeakLabel)>) -> (f64, usize, bool) {
    let (mut num, mut den, mut matches) = (0.0, 0.0, 0);
    for (w, v) in votes {
        match v {
            WeakLabel::Match => {
                num += w;
                den += w;
                matches += 1;
            }
            WeakLabel::NoMatch => den += w,
            WeakLabel::Abstain => {}
        }
    }
    if den > 0.0 {
        ((num / den).clamp(0.0, 1.0), matches, false)
    } else {
        (0.0, matches, true)
    }
}

/// Largest k ≥ min(3, n) such that the committee F1 strictly increases at
/// every extension step; `committee_f1(j)` scores the first j functions.
pub fn prefix_rule(n: usize, mut committee_f1: impl FnMut(usize) -> f64) -> usize {
    if n <= MIN_COMMITTEE {
        return n;
    }
    let mut k = MIN_COMMITTEE;
    let mut best = committee_f1(k);
    for j in MIN_COMMITTEE + 1..=n {
        let f = committee_f1(j);
        if f > best {
            k = j;
            best = f;
        } else {
            break;
        }
    }
    k
}

/// F1 on A of the committee formed by `functions` with precision weights.
pub fn committee_f1_on(functions: &[&FunctionVotes], annotations: &AnnotationStore) -> f64 {
    let weights: Vec<f64> = functions
        .iter()
        .map(|f| weight_for_precision(lf_scores_on_annotations(&f.votes, annotations).precision))
        .collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for &(pair, label) in annotations.entries() {
        let (p, _, _) = weighted_vote(weights.iter().zip(functions).map(|(&w, f)| (w, f.votes[pair])));
        match (p >= DECISION_THRESHOLD, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    BinaryScores::from_counts(tp, fp, fn_).f1
}

/// Indices of Λ ordered by F1 on A descending, ties by id.
pub fn f1_order(functions: &[FunctionVotes], scores: &[BinaryScores]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..functions.len()).collect();
    order.sort_by(|&a, &b| scores[b].f1.total_cmp(&scores[a].f1).then_with(|| functions[a].id.cmp(&functions[b].id)));
    order
}

/// Curated member indices: the F1-sorted prefix chosen by [`prefix_rule`].
pub fn select_committee(functions: &[FunctionVotes], annotations: &AnnotationStore) -> Vec<usize> {
    let scores: Vec<BinaryScores> = functions.iter().map(|f| lf_scores_on_annotations(&f.votes, annotations)).collect();
    let mut order = f1_order(functions, &scores);
    let weights: Vec<f64> = order.iter().map(|&i| weight_for_precision(scores[i].precision)).collect();

    // Running weighted sums per annotated pair, extended one function at a time.
    let entries = annotations.entries();
    let mut num = vec![0.0; entries.len()];
    let mut den = vec![0.0; entries.len()];
    let mut added = 0;
    let k = prefix_rule(order.len(), |j| {
        while added < j {
            let f = &functions[order[added]];
            let w = weights[added];
            for (slot, &(pair, _)) in entries.iter().enumerate() {
                match f.votes[pair] {
                    WeakLabel::Match => {
                        num[slot] += w;
                        den[slot] += w;
                    }
                    WeakLabel::NoMatch => den[slot] += w,
                    WeakLabel::Abstain => {}
                }
            }
            added += 1;
        }
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (slot, &(_, label)) in entries.iter().enumerate() {
            let predicted = den[slot] > 0.0 && (num[slot] / den[slot]).clamp(0.0, 1.0) >= DECISION_THRESHOLD;
            match (predicted, label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        BinaryScores::from_counts(tp, fp, fn_).f1
    });
    order.truncate(k);
    order
}

impl CommitteeModel {
    /// All of Λ with equal weights.
    pub fn uniform(functions: &[FunctionVotes], fitted_from: usize) -> Self {
        let members = functions
            .iter()
            .enumerate()
            .map(|(index, f)| Member { index, id: f.id.clone(), weight: BASE_WEIGHT })
            .collect();
        CommitteeModel { mode: CommitteeMode::Uniform, members, threshold: DECISION_THRESHOLD, fitted_from }
    }

    /// Curated committee from Λ and A. Stays uniform while |A| < `a_min` or
    /// while no function has a nonzero F1 on A.
    pub fn fit(functions: &[FunctionVotes], annotations: &AnnotationStore, mode: EnsembleMode, a_min: usize) -> Self {
        let fitted_from = annotations.len();
        if mode == EnsembleMode::Uniform || annotations.len() < a_min.max(1) || functions.is_empty() {
            return Self::uniform(functions, fitted_from);
        }
        let scores: Vec<BinaryScores> =
            functions.iter().map(|f| lf_scores_on_annotations(&f.votes, annotations)).collect();
        if scores.iter().all(|s| s.f1 == 0.0) {
            return Self::uniform(functions, fitted_from);
        }
        let members = select_committee(functions, annotations)
            .into_iter()
            .map(|index| Member {
                index,
                id: functions[index].id.clone(),
                weight: weight_for_precision(scores[index].precision),
            })
            .collect();
        CommitteeModel { mode: CommitteeMode::Curated, members, threshold: DECISION_THRESHOLD, fitted_from }
    }

    pub fn predict(&self, functions: &[FunctionVotes], pair: usize) -> CommitteePrediction {
        let (p, match_votes, all_abstain) =
            weighted_vote(self.members.iter().map(|m| (m.weight, functions[m.index].votes[pair])));
        CommitteePrediction { pair, predicted: !all_abstain && p >= self.threshold, p, match_votes, all_abstain }
    }

    /// Predictions for every candidate, indexed by pair.
    pub fn predict_all(&self, functions: &[FunctionVotes], candidates: usize, exec: Exec) -> Vec<CommitteePrediction> {
        exec.map_range(candidates, |pair| self.predict(functions, pair))
    }

    pub fn member_ids(&self) -> Vec<String> {
        self.members.iter().map(|m| m.id.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{InitialLf, LabelingFunction};
    use WeakLabel::*;

    fn lf(i: usize, votes: Vec<WeakLabel>) -> FunctionVotes {
        let mut f = FunctionVotes::new(LabelingFunction::Initial { lf: InitialLf::ALL[i] }, votes);
        f.id = format!("f{i:02}");
        f
    }

    #[test]
    fn weights() {
        assert_eq!(weight_for_precision(1.0), 0.7);
        assert!((weight_for_precision(0.8) - 0.56).abs() < 1e-15);
        assert_eq!(weight_for_precision(0.0), 0.01);
    }

    #[test]
    fn vote_model_examples() {
        assert_eq!(weighted_vote([(0.7, Match), (0.3, Abstain), (0.2, Match)]), (1.0, 2, false));
        assert_eq!(weighted_vote([(0.7, Abstain), (0.3, Abstain)]), (0.0, 0, true));
        let (p, _, _) = weighted_vote([(0.7, Match), (0.35, NoMatch)]);
        assert!((p - 0.7 / 1.05).abs() < 1e-12);
        assert!(p >= DECISION_THRESHOLD);
    }

    #[test]
    fn prefix_rule_examples() {
        assert_eq!(prefix_rule(2, |_| 0.0), 2);
        assert_eq!(prefix_rule(3, |_| 1.0), 3);
        let seq = [0.70, 0.75, 0.75, 0.80];
        assert_eq!(prefix_rule(6, |j| seq[j - 3]), 4);
        assert_eq!(prefix_rule(6, |_| 0.5), 3);
        let rising = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(prefix_rule(6, |j| rising[j - 3]), 6);
    }

    #[test]
    fn zero_precision_member_barely_moves_output() {
        // Two accurate functions plus one that is always wrong on A.
        let a = AnnotationStore::from_entries(4, &[(0, true), (1, false), (2, true), (3, false)]).unwrap();
        let f = vec![
            lf(0, vec![Match, NoMatch, Match, NoMatch]),
            lf(1, vec![Match, NoMatch, Abstain, NoMatch]),
            lf(2, vec![NoMatch, Match, NoMatch, Match]),
        ];
        let cmt = CommitteeModel::fit(&f, &a, EnsembleMode::Curated, 1);
        assert_eq!(cmt.mode, CommitteeMode::Curated);
        assert_eq!(cmt.members[2].weight, ZERO_PRECISION_WEIGHT);
        let without =
            |pair: usize| weighted_vote(cmt.members[..2].iter().map(|m| (m.weight, f[m.index].votes[pair]))).0;
        for pair in 0..4 {
            let p = cmt.predict(&f, pair).p;
            // Worst case is a lone 0.7 vote against it: 0.01 / 0.71.
            assert!((p - without(pair)).abs() <= 0.01 / 0.71 + 1e-12, "pair {pair}: {p}");
            assert_eq!(p >= 0.5, without(pair) >= 0.5);
        }
    }

    #[test]
    fn committee_f1_matches_hand_count() {
        let labels = [true, true, true, false, false, false, false, false, false, false];
        let entries: Vec<_> = labels.iter().copied().enumerate().collect();
        let a = AnnotationStore::from_entries(10, &entries).unwrap();
        let f = [
            lf(0, vec![Match, Match, NoMatch, Match, NoMatch, NoMatch, Abstain, NoMatch, NoMatch, NoMatch]),
            lf(1, vec![Match, Abstain, Match, NoMatch, Match, NoMatch, NoMatch, Abstain, NoMatch, NoMatch]),
            lf(2, vec![Abstain, Match, Match, Match, NoMatch, Abstain, Abstain, NoMatch, Match, NoMatch]),
        ];
        // Precisions on A: 2/3, 2/3, 2/4, so weights 0.4667, 0.4667, 0.35.
        let w = [0.7 * 2.0 / 3.0, 0.7 * 2.0 / 3.0, 0.35];
        let mut counts = (0, 0, 0);
        for (pair, &label) in labels.iter().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, func) in f.iter().enumerate() {
                match func.votes[pair] {
                    Match => {
                        num += w[j];
                        den += w[j];
                    }
                    NoMatch => den += w[j],
                    Abstain => {}
                }
            }
            let yhat = den > 0.0 && num / den >= 0.5;
            match (yhat, label) {
                (true, true) => counts.0 += 1,
                (true, false) => counts.1 += 1,
                (false, true) => counts.2 += 1,
                _ => {}
            }
        }
        let expected = BinaryScores::from_counts(counts.0, counts.1, counts.2).f1;
        let refs: Vec<&FunctionVotes> = f.iter().collect();
        assert!((committee_f1_on(&refs, &a) - expected).abs() < 1e-12);
        assert_eq!(counts, (3, 1, 0));
    }

    #[test]
    fn degenerate_a_keeps_uniform() {
        let a = AnnotationStore::from_entries(2, &[(0, false), (1, false)]).unwrap();
        let f = vec![lf(0, vec![Match, Match]), lf(1, vec![NoMatch, Match])];
        let cmt = CommitteeModel::fit(&f, &a, EnsembleMode::Curated, 1);
        assert_eq!(cmt.mode, CommitteeMode::Uniform);
        assert!(cmt.members.iter().all(|m| m.weight == BASE_WEIGHT));
        let early = CommitteeModel::fit(&f, &a, EnsembleMode::Curated, 10);
        assert_eq!(early.mode, CommitteeMode::Uniform);
    }

    #[test]
    fn exact_labels_give_f1_one_and_all_zero_gives_zero() {
        let a = AnnotationStore::from_entries(3, &[(0, true), (1, false), (2, false)]).unwrap();
        let perfect = lf(0, vec![Match, NoMatch, NoMatch]);
        let zeros = lf(1, vec![NoMatch, NoMatch, NoMatch]);
        assert_eq!(committee_f1_on(&[&perfect], &a), 1.0);
        assert_eq!(committee_f1_on(&[&zeros], &a), 0.0);
    }
}
