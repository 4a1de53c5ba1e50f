//! Key-based top-k blocking: for every source class and every blocking key,
//! keep the k best-scoring target classes; the union is the candidate set.

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::features::{attribute_similarity, EmbeddedSchema, Slot};
use crate::ontology::{Attribute, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockingKey {
    NumCommonWords,
    ClassNameWordsSimilarityA,
    ClassNameWordsSimilarityB,
    LabelWordsSimilarityA,
    LabelWordsSimilarityB,
    CommentSimilarityA,
    CommentSimilarityB,
}

impl BlockingKey {
    pub const ALL: [BlockingKey; 7] = [
        BlockingKey::NumCommonWords,
        BlockingKey::ClassNameWordsSimilarityA,
        BlockingKey::ClassNameWordsSimilarityB,
        BlockingKey::LabelWordsSimilarityA,
        BlockingKey::LabelWordsSimilarityB,
        BlockingKey::CommentSimilarityA,
        BlockingKey::CommentSimilarityB,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BlockingKey::NumCommonWords => "num_common_words",
            BlockingKey::ClassNameWordsSimilarityA => "class_name_words_similarity_a",
            BlockingKey::ClassNameWordsSimilarityB => "class_name_words_similarity_b",
            BlockingKey::LabelWordsSimilarityA => "label_words_similarity_a",
            BlockingKey::LabelWordsSimilarityB => "label_words_similarity_b",
            BlockingKey::CommentSimilarityA => "comment_similarity_a",
            BlockingKey::CommentSimilarityB => "comment_similarity_b",
        }
    }

    fn embedding_source(self) -> Option<(Attribute, Slot)> {
        Some(match self {
            BlockingKey::NumCommonWords => return None,
            BlockingKey::ClassNameWordsSimilarityA => (Attribute::Name, Slot::A),
            BlockingKey::ClassNameWordsSimilarityB => (Attribute::Name, Slot::B),
            BlockingKey::LabelWordsSimilarityA => (Attribute::Label, Slot::A),
            BlockingKey::LabelWordsSimilarityB => (Attribute::Label, Slot::B),
            BlockingKey::CommentSimilarityA => (Attribute::Comment, Slot::A),
            BlockingKey::CommentSimilarityB => (Attribute::Comment, Slot::B),
        })
    }

    /// Higher is more similar. Similarity keys score -1 when either attribute
    /// is empty so such targets rank last.
    pub fn score(self, source: &EmbeddedSchema, s: usize, target: &EmbeddedSchema, t: usize) -> f64 {
        match self.embedding_source() {
            None => source.name_tokens[s].intersection(&target.name_tokens[t]).count() as f64,
            Some((attr, slot)) => {
                let (a, b) = (source.embeddings[s].get(attr, slot), target.embeddings[t].get(attr, slot));
                if a.is_empty() || b.is_empty() {
                    -1.0
                } else {
                    attribute_similarity(a, b)
                }
            }
        }
    }
}

/// k = 50 when the target has more than 50 classes, else |E_T|.
pub fn choose_k(target_count: usize) -> usize {
    if target_count > 50 {
        50
    } else {
        target_count
    }
}

/// Indices into the source and target schemas. Ordering is by (source iri,
/// target iri) because schemas are iri-sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidatePair {
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub pairs: Vec<CandidatePair>,
    /// First key (in registry order) that admitted each pair.
    pub provenance: Vec<BlockingKey>,
    pub k: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn position(&self, pair: CandidatePair) -> Option<usize> {
        self.pairs.binary_search(&pair).ok()
    }
}

/// The k targets with the highest key score, ties by ascending target iri.
pub fn top_k_for_key(
    source: &EmbeddedSchema,
    s: usize,
    target: &EmbeddedSchema,
    key: BlockingKey,
    k: usize,
) -> Vec<(usize, f64)> {
    let k = k.min(target.len());
    if k == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(usize, f64)> = (0..target.len()).map(|t| (t, key.score(source, s, target, t))).collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored
}

pub fn generate_candidates(source: &EmbeddedSchema, target: &EmbeddedSchema, exec: Exec) -> CandidateSet {
    generate_candidates_with_k(source, target, choose_k(target.len()), exec)
}

pub fn generate_candidates_with_k(
    source: &EmbeddedSchema,
    target: &EmbeddedSchema,
    k: usize,
    exec: Exec,
) -> CandidateSet {
    let per_source = exec.map_range(source.len(), |s| {
        let mut admitted: Vec<Option<BlockingKey>> = vec![None; target.len()];
        for key in BlockingKey::ALL {
            for (t, _) in top_k_for_key(source, s, target, key, k) {
                admitted[t].get_or_insert(key);
            }
        }
        admitted
            .into_iter()
            .enumerate()
            .filter_map(|(t, key)| key.map(|key| (CandidatePair { source: s, target: t }, key)))
            .collect::<Vec<_>>()
    });
    let (pairs, provenance) = per_source.into_iter().flatten().unzip();
    CandidateSet { pairs, provenance, k }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingReport {
    pub candidates: usize,
    pub universe: u64,
    pub k: usize,
    pub truth_total: usize,
    pub truth_retained: usize,
    pub missed: Vec<(String, String)>,
    pub recall: Option<f64>,
}

pub fn blocking_report(
    source: &EmbeddedSchema,
    target: &EmbeddedSchema,
    set: &CandidateSet,
    truth: Option<&GroundTruth>,
) -> BlockingReport {
    let mut report = BlockingReport {
        candidates: set.len(),
        universe: source.len() as u64 * target.len() as u64,
        k: set.k,
        truth_total: 0,
        truth_retained: 0,
        missed: Vec::new(),
        recall: None,
    };
    if let Some(truth) = truth {
        report.truth_total = truth.len();
        for (s, t) in &truth.pairs {
            let pair = source.schema.index_of(s).zip(target.schema.index_of(t));
            match pair.and_then(|(s, t)| set.position(CandidatePair { source: s, target: t })) {
                Some(_) => report.truth_retained += 1,
                None => report.missed.push((s.clone(), t.clone())),
            }
        }
        if !report.missed.is_empty() {
            log::warn!("blocking dropped {} of {} ground-truth pairs", report.missed.len(), truth.len());
        }
        report.recall = Some(if truth.is_empty() { 1.0 } else { report.truth_retained as f64 / truth.len() as f64 });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Providers;
    use crate::ontology::{ClassRecord, OntologySchema};

    fn embedded(id: &str, names: &[&str]) -> EmbeddedSchema {
        let classes = names.iter().enumerate().map(|(i, n)| ClassRecord::new(format!("{id}#{i:02}"), *n)).collect();
        let (schema, _) = OntologySchema::from_classes(id, classes).unwrap();
        EmbeddedSchema::new(schema, &Providers::builtin(), Exec::Sequential).unwrap()
    }

    #[test]
    fn choose_k_table() {
        assert_eq!(choose_k(915), 50);
        assert_eq!(choose_k(38), 38);
        assert_eq!(choose_k(50), 50);
        assert_eq!(choose_k(51), 50);
    }

    #[test]
    fn registry_has_seven_unique_keys() {
        let mut ids: Vec<_> = BlockingKey::ALL.iter().map(|k| k.id()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 7);
    }

    #[test]
    fn full_k_returns_all_targets() {
        let s = embedded("s", &["Paper"]);
        let t = embedded("t", &["Paper", "Author", "Review"]);
        let top = top_k_for_key(&s, 0, &t, BlockingKey::ClassNameWordsSimilarityA, 3);
        assert_eq!(top.len(), 3);
        assert_eq!(top[0].0, 0);
    }

    #[test]
    fn ties_rank_smaller_iri_first() {
        let s = embedded("s", &["Paper"]);
        let t = embedded("t", &["Author", "Review", "Person"]);
        // No shared words: all scores 0, so iri order decides.
        let top = top_k_for_key(&s, 0, &t, BlockingKey::NumCommonWords, 2);
        assert_eq!(top, vec![(0, 0.0), (1, 0.0)]);
    }

    #[test]
    fn num_common_words_matches_exhaustive_scoring() {
        let s = embedded("s", &["ConferencePaperReview"]);
        let t = embedded("t", &["Paper", "ConferencePaper", "Review", "Person", "PaperReviewConference"]);
        let top = top_k_for_key(&s, 0, &t, BlockingKey::NumCommonWords, 2);
        // Exhaustive: shared tokens = [1, 2, 1, 0, 3].
        assert_eq!(top, vec![(4, 3.0), (1, 2.0)]);
    }

    #[test]
    fn single_class_ontologies_give_one_candidate() {
        let s = embedded("s", &["Paper"]);
        let t = embedded("t", &["Article"]);
        let set = generate_candidates(&s, &t, Exec::Sequential);
        assert_eq!(set.len(), 1);
        assert_eq!(set.provenance, vec![BlockingKey::NumCommonWords]);
    }

    #[test]
    fn empty_labels_rank_last() {
        let s = embedded("s", &["Paper"]);
        let t = embedded("t", &["Paper"]);
        assert_eq!(BlockingKey::LabelWordsSimilarityA.score(&s, 0, &t, 0), -1.0);
    }

    #[test]
    fn union_is_sorted_and_unique() {
        let names = ["Paper", "Author", "Review", "ConferenceMember", "PosterSession", "Chair", "Track"];
        let s = embedded("s", &names);
        let t = embedded("t", &names);
        let set = generate_candidates_with_k(&s, &t, 2, Exec::Parallel);
        assert!(set.pairs.windows(2).all(|w| w[0] < w[1]));
        assert!(set.len() <= s.len() * 7 * 2);
        assert_eq!(set, generate_candidates_with_k(&s, &t, 2, Exec::Sequential));
    }
}
