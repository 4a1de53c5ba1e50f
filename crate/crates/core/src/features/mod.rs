//! The nine fixed distance metrics computed for every candidate pair, and
//! the embedding providers behind the six embedding distances.

pub mod embedding;
pub mod metrics;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use embedding::{Embedding, EmbeddingProvider, FileEmbeddings, HashingEmbedder};
pub use metrics::{
    cosine_similarity, embedding_distance, hamming_distance, levenshtein_distance, word_overlap_distance,
};

use crate::error::Result;
use crate::exec::Exec;
use crate::ontology::{normalize, Attribute, ClassRecord, OntologySchema};

/// Provider slot: the two encoders are interchangeable but kept distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    A,
    B,
}

#[derive(Clone)]
pub struct Providers {
    pub a: Arc<dyn EmbeddingProvider>,
    pub b: Arc<dyn EmbeddingProvider>,
}

impl Providers {
    pub fn builtin() -> Self {
        Providers { a: Arc::new(HashingEmbedder::provider_a()), b: Arc::new(HashingEmbedder::provider_b()) }
    }

    pub fn get(&self, slot: Slot) -> &dyn EmbeddingProvider {
        match slot {
            Slot::A => self.a.as_ref(),
            Slot::B => self.b.as_ref(),
        }
    }
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers").field("a", &self.a.id()).field("b", &self.b.id()).finish()
    }
}

/// Embeddings of one class: `[attribute][slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEmbeddings {
    vectors: [[Embedding; 2]; 3],
}

impl ClassEmbeddings {
    pub fn get(&self, attribute: Attribute, slot: Slot) -> &Embedding {
        &self.vectors[attribute as usize][slot as usize]
    }
}

pub fn embed_class(class: &ClassRecord, providers: &Providers) -> Result<ClassEmbeddings> {
    let embed =
        |attr: Attribute, slot: Slot| providers.get(slot).embed_attribute(&class.iri, attr, class.attribute(attr));
    Ok(ClassEmbeddings {
        vectors: [
            [embed(Attribute::Name, Slot::A)?, embed(Attribute::Name, Slot::B)?],
            [embed(Attribute::Label, Slot::A)?, embed(Attribute::Label, Slot::B)?],
            [embed(Attribute::Comment, Slot::A)?, embed(Attribute::Comment, Slot::B)?],
        ],
    })
}

pub fn embed_schema(schema: &OntologySchema, providers: &Providers, exec: Exec) -> Result<Vec<ClassEmbeddings>> {
    exec.map(schema.classes(), |c| embed_class(c, providers)).into_iter().collect()
}

/// Similarity of two attribute embeddings; empty attributes give 0.
pub fn attribute_similarity(a: &Embedding, b: &Embedding) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    metrics::cosine_unchecked(a.values(), b.values())
}

/// The fixed metrics, in feature-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedMetric {
    EmbNameA,
    EmbNameB,
    EmbLabelA,
    EmbLabelB,
    EmbCommentA,
    EmbCommentB,
    LevName,
    HamName,
    OverlapName,
}

impl FixedMetric {
    pub const ALL: [FixedMetric; 9] = [
        FixedMetric::EmbNameA,
        FixedMetric::EmbNameB,
        FixedMetric::EmbLabelA,
        FixedMetric::EmbLabelB,
        FixedMetric::EmbCommentA,
        FixedMetric::EmbCommentB,
        FixedMetric::LevName,
        FixedMetric::HamName,
        FixedMetric::OverlapName,
    ];

    pub const EMBEDDING: [FixedMetric; 6] = [
        FixedMetric::EmbNameA,
        FixedMetric::EmbNameB,
        FixedMetric::EmbLabelA,
        FixedMetric::EmbLabelB,
        FixedMetric::EmbCommentA,
        FixedMetric::EmbCommentB,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FixedMetric::EmbNameA => "emb_name_a",
            FixedMetric::EmbNameB => "emb_name_b",
            FixedMetric::EmbLabelA => "emb_label_a",
            FixedMetric::EmbLabelB => "emb_label_b",
            FixedMetric::EmbCommentA => "emb_comment_a",
            FixedMetric::EmbCommentB => "emb_comment_b",
            FixedMetric::LevName => "lev_name",
            FixedMetric::HamName => "ham_name",
            FixedMetric::OverlapName => "overlap_name",
        }
    }

    pub fn embedding_source(self) -> Option<(Attribute, Slot)> {
        Some(match self {
            FixedMetric::EmbNameA => (Attribute::Name, Slot::A),
            FixedMetric::EmbNameB => (Attribute::Name, Slot::B),
            FixedMetric::EmbLabelA => (Attribute::Label, Slot::A),
            FixedMetric::EmbLabelB => (Attribute::Label, Slot::B),
            FixedMetric::EmbCommentA => (Attribute::Comment, Slot::A),
            FixedMetric::EmbCommentB => (Attribute::Comment, Slot::B),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 9]);

impl FeatureVector {
    pub fn get(&self, metric: FixedMetric) -> f64 {
        self.0[metric as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn fixed_feature_vector(
    source: &ClassRecord,
    source_emb: &ClassEmbeddings,
    target: &ClassRecord,
    target_emb: &ClassEmbeddings,
) -> FeatureVector {
    let mut out = [0.0; 9];
    for metric in FixedMetric::EMBEDDING {
        let (attr, slot) = metric.embedding_source().expect("embedding metric");
        let sim = attribute_similarity(source_emb.get(attr, slot), target_emb.get(attr, slot));
        out[metric as usize] = embedding_distance(sim);
    }
    let (sn, tn) = (normalize(&source.name), normalize(&target.name));
    out[FixedMetric::LevName as usize] = levenshtein_distance(&sn, &tn);
    out[FixedMetric::HamName as usize] = hamming_distance(&sn, &tn);
    out[FixedMetric::OverlapName as usize] = word_overlap_distance(&source.name, &target.name);
    FeatureVector(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(iri: &str, name: &str, label: &str, comment: &str) -> ClassRecord {
        let mut c = ClassRecord::new(iri, name);
        c.label = label.into();
        c.comment = comment.into();
        c
    }

    #[test]
    fn identical_classes_have_zero_distances() {
        let p = Providers::builtin();
        let s = class("s#P", "ConferencePaper", "conference paper", "A paper submitted to a conference");
        let t = class("t#P", "ConferencePaper", "conference paper", "A paper submitted to a conference");
        let v = fixed_feature_vector(&s, &embed_class(&s, &p).unwrap(), &t, &embed_class(&t, &p).unwrap());
        assert_eq!(v.0, [0.0; 9]);
    }

    #[test]
    fn empty_comments_are_maximal() {
        let p = Providers::builtin();
        let s = class("s#P", "Paper", "paper", "");
        let t = class("t#P", "Paper", "paper", "");
        let v = fixed_feature_vector(&s, &embed_class(&s, &p).unwrap(), &t, &embed_class(&t, &p).unwrap());
        assert_eq!(v.get(FixedMetric::EmbCommentA), 1.0);
        assert_eq!(v.get(FixedMetric::EmbCommentB), 1.0);
        assert_eq!(v.get(FixedMetric::EmbNameA), 0.0);
        assert_eq!(v.0.len(), 9);
    }

    #[test]
    fn metric_order_matches_ids() {
        let ids: Vec<_> = FixedMetric::ALL.iter().map(|m| m.id()).collect();
        assert_eq!(
            ids,
            [
                "emb_name_a",
                "emb_name_b",
                "emb_label_a",
                "emb_label_b",
                "emb_comment_a",
                "emb_comment_b",
                "lev_name",
                "ham_name",
                "overlap_name"
            ]
        );
        for (i, m) in FixedMetric::ALL.iter().enumerate() {
            assert_eq!(*m as usize, i);
        }
    }
}

/// A schema with its class embeddings and name token sets precomputed.
#[derive(Debug, Clone)]
pub struct EmbeddedSchema {
    pub schema: OntologySchema,
    pub embeddings: Vec<ClassEmbeddings>,
    pub name_tokens: Vec<std::collections::BTreeSet<String>>,
}

impl EmbeddedSchema {
    pub fn new(schema: OntologySchema, providers: &Providers, exec: Exec) -> Result<Self> {
        let embeddings = embed_schema(&schema, providers, exec)?;
        let name_tokens = schema.classes().iter().map(|c| metrics::token_set(&c.name)).collect();
        Ok(EmbeddedSchema { schema, embeddings, name_tokens })
    }

    pub fn len(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schema.is_empty()
    }
}
