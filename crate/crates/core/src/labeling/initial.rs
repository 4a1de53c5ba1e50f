//! The fifteen static labeling functions. They are conservative: they vote
//! match only on strong evidence and abstain on anything inconclusive.

use std::collections::BTreeSet;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use super::lexicon::SynonymLexicon;
use super::WeakLabel;
use crate::error::{Error, Result};
use crate::features::metrics::jaccard;
use crate::features::{FeatureVector, FixedMetric};
use crate::ontology::{normalize, tokenize, OntologySchema};

pub const NAME_MATCH_SIMILARITY: f64 = 0.90;
pub const NAME_ABSTAIN_SIMILARITY: f64 = 0.75;
pub const EMBEDDING_MATCH_DISTANCE: f64 = 0.15;
pub const EMBEDDING_ABSTAIN_DISTANCE: f64 = 0.35;
pub const WORD_OVERLAP_JACCARD: f64 = 0.8;
pub const STRUCTURE_MIN_SHARED: usize = 2;
pub const STRUCTURE_JACCARD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InitialLf {
    ClassNameEqual,
    ClassNameStemmedEqual,
    Acronyms,
    ClassNameSynonyms,
    LabelEqual,
    RootNounsEqual,
    ClassNameDistance,
    NameSegmentOverlap,
    LabelWordsOverlap,
    SubclassesOverlap,
    SuperclassesOverlap,
    PropertiesOverlap,
    ClassNameSimilarity,
    LabelSimilarity,
    CommentSimilarity,
}

impl InitialLf {
    pub const ALL: [InitialLf; 15] = [
        InitialLf::ClassNameEqual,
        InitialLf::ClassNameStemmedEqual,
        InitialLf::Acronyms,
        InitialLf::ClassNameSynonyms,
        InitialLf::LabelEqual,
        InitialLf::RootNounsEqual,
        InitialLf::ClassNameDistance,
        InitialLf::NameSegmentOverlap,
        InitialLf::LabelWordsOverlap,
        InitialLf::SubclassesOverlap,
        InitialLf::SuperclassesOverlap,
        InitialLf::PropertiesOverlap,
        InitialLf::ClassNameSimilarity,
        InitialLf::LabelSimilarity,
        InitialLf::CommentSimilarity,
    ];

    pub fn id(self) -> &'static str {
        match self {
            InitialLf::ClassNameEqual => "LF_class_name_equal",
            InitialLf::ClassNameStemmedEqual => "LF_class_name_stemmed_equal",
            InitialLf::Acronyms => "LF_acronyms",
            InitialLf::ClassNameSynonyms => "LF_class_name_synonyms",
            InitialLf::LabelEqual => "LF_label_equal",
            InitialLf::RootNounsEqual => "LF_root_nouns_equal",
            InitialLf::ClassNameDistance => "LF_class_name_distance",
            InitialLf::NameSegmentOverlap => "LF_name_segment_overlap",
            InitialLf::LabelWordsOverlap => "LF_label_words_overlap",
            InitialLf::SubclassesOverlap => "LF_subclasses_overlap",
            InitialLf::SuperclassesOverlap => "LF_superclasses_overlap",
            InitialLf::PropertiesOverlap => "LF_properties_overlap",
            InitialLf::ClassNameSimilarity => "LF_class_name_similarity",
            InitialLf::LabelSimilarity => "LF_label_similarity",
            InitialLf::CommentSimilarity => "LF_comment_similarity",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|lf| lf.id() == id).ok_or_else(|| Error::UnknownFunction(id.to_string()))
    }

    pub fn evaluate(self, pair: &PairView<'_>) -> WeakLabel {
        let (s, t) = (pair.source, pair.target);
        match self {
            InitialLf::ClassNameEqual => match_or_abstain(s.name == t.name),
            InitialLf::ClassNameStemmedEqual => match_or_abstain(s.stemmed == t.stemmed),
            InitialLf::Acronyms => acronyms(s, t),
            InitialLf::ClassNameSynonyms => synonyms(s, t, pair.lexicon),
            InitialLf::LabelEqual => {
                if s.label.is_empty() || t.label.is_empty() {
                    WeakLabel::Abstain
                } else {
                    match_or_abstain(s.label == t.label)
                }
            }
            InitialLf::RootNounsEqual => match (s.name_tokens.last(), t.name_tokens.last()) {
                (Some(a), Some(b)) => match_or_abstain(a == b),
                _ => WeakLabel::Abstain,
            },
            InitialLf::ClassNameDistance => {
                let sim = 1.0 - pair.features.get(FixedMetric::LevName);
                if sim >= NAME_MATCH_SIMILARITY {
                    WeakLabel::Match
                } else if sim >= NAME_ABSTAIN_SIMILARITY {
                    WeakLabel::Abstain
                } else {
                    WeakLabel::NoMatch
                }
            }
            InitialLf::NameSegmentOverlap => word_overlap(&s.name_token_set, &t.name_token_set),
            InitialLf::LabelWordsOverlap => word_overlap(&s.label_tokens, &t.label_tokens),
            InitialLf::SubclassesOverlap => structure_overlap(&s.subclasses, &t.subclasses),
            InitialLf::SuperclassesOverlap => structure_overlap(&s.superclasses, &t.superclasses),
            InitialLf::PropertiesOverlap => structure_overlap(&s.properties, &t.properties),
            InitialLf::ClassNameSimilarity => {
                embedding_vote(s.name.is_empty() || t.name.is_empty(), pair.features.get(FixedMetric::EmbNameB))
            }
            InitialLf::LabelSimilarity => {
                embedding_vote(s.label.is_empty() || t.label.is_empty(), pair.features.get(FixedMetric::EmbLabelB))
            }
            InitialLf::CommentSimilarity => {
                embedding_vote(!s.has_comment || !t.has_comment, pair.features.get(FixedMetric::EmbCommentB))
            }
        }
    }
}

pub fn evaluate_initial_lf(id: &str, pair: &PairView<'_>) -> Result<WeakLabel> {
    Ok(InitialLf::from_id(id)?.evaluate(pair))
}

fn match_or_abstain(condition: bool) -> WeakLabel {
    if condition {
        WeakLabel::Match
    } else {
        WeakLabel::Abstain
    }
}

fn acronyms(s: &ClassProfile, t: &ClassProfile) -> WeakLabel {
    let (sn, tn) = (s.name_tokens.len(), t.name_tokens.len());
    if sn < 2 && tn < 2 {
        return WeakLabel::Abstain;
    }
    let hit = (sn >= 2 && s.acronym == t.compact_name)
        || (tn >= 2 && t.acronym == s.compact_name)
        || (sn >= 2 && tn >= 2 && s.acronym == t.acronym);
    match_or_abstain(hit)
}

fn synonyms(s: &ClassProfile, t: &ClassProfile, lexicon: Option<&SynonymLexicon>) -> WeakLabel {
    let Some(lex) = lexicon.filter(|l| !l.is_empty()) else {
        return WeakLabel::Abstain;
    };
    let known = |p: &ClassProfile| p.name_tokens.iter().any(|tok| lex.has_entry(tok));
    if s.name_tokens.len() != t.name_tokens.len() || !(known(s) || known(t)) {
        return WeakLabel::Abstain;
    }
    let same = s.name_tokens.iter().zip(&t.name_tokens).all(|(a, b)| lex.canonical(a) == lex.canonical(b));
    match_or_abstain(same)
}

fn word_overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> WeakLabel {
    if a.is_empty() || b.is_empty() {
        WeakLabel::Abstain
    } else if jaccard(a, b) >= WORD_OVERLAP_JACCARD {
        WeakLabel::Match
    } else {
        WeakLabel::NoMatch
    }
}

fn structure_overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> WeakLabel {
    if a.is_empty() || b.is_empty() {
        return WeakLabel::Abstain;
    }
    let shared = a.intersection(b).count();
    if shared >= STRUCTURE_MIN_SHARED && jaccard(a, b) >= STRUCTURE_JACCARD {
        WeakLabel::Match
    } else {
        WeakLabel::NoMatch
    }
}

fn embedding_vote(empty: bool, distance: f64) -> WeakLabel {
    if empty {
        WeakLabel::Abstain
    } else if distance <= EMBEDDING_MATCH_DISTANCE {
        WeakLabel::Match
    } else if distance <= EMBEDDING_ABSTAIN_DISTANCE {
        WeakLabel::Abstain
    } else {
        WeakLabel::NoMatch
    }
}

/// Per-class strings and sets the initial functions compare.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    pub name: String,
    pub name_tokens: Vec<String>,
    pub name_token_set: BTreeSet<String>,
    /// Name tokens without separators, e.g. "programcommittee".
    pub compact_name: String,
    pub stemmed: String,
    pub acronym: String,
    pub label: String,
    pub label_tokens: BTreeSet<String>,
    pub has_comment: bool,
    pub subclasses: BTreeSet<String>,
    pub superclasses: BTreeSet<String>,
    pub properties: BTreeSet<String>,
}

pub fn stemmer() -> Stemmer {
    Stemmer::create(Algorithm::English)
}

pub fn stem_tokens(stemmer: &Stemmer, tokens: &[String]) -> String {
    tokens.iter().map(|t| stemmer.stem(t).into_owned()).collect::<Vec<_>>().join(" ")
}

pub fn profile_schema(schema: &OntologySchema) -> Vec<ClassProfile> {
    let stemmer = stemmer();
    let names_of = |iris: &BTreeSet<String>| -> BTreeSet<String> {
        iris.iter().filter_map(|iri| schema.by_iri(iri)).map(|c| normalize(&c.name)).collect()
    };
    schema
        .classes()
        .iter()
        .map(|c| {
            let name_tokens = tokenize(&c.name);
            ClassProfile {
                name: name_tokens.join(" "),
                name_token_set: name_tokens.iter().cloned().collect(),
                compact_name: name_tokens.concat(),
                stemmed: stem_tokens(&stemmer, &name_tokens),
                acronym: name_tokens.iter().filter_map(|t| t.chars().next()).collect(),
                label: normalize(&c.label),
                label_tokens: tokenize(&c.label).into_iter().collect(),
                has_comment: !tokenize(&c.comment).is_empty(),
                subclasses: names_of(&c.subclasses),
                superclasses: names_of(&c.superclasses),
                properties: c.properties.iter().map(|p| normalize(p)).filter(|p| !p.is_empty()).collect(),
                name_tokens,
            }
        })
        .collect()
}

/// Everything an initial function may look at for one candidate pair.
#[derive(Debug, Clone, Copy)]
pub struct PairView<'a> {
    pub source: &'a ClassProfile,
    pub target: &'a ClassProfile,
    pub features: &'a FeatureVector,
    pub lexicon: Option<&'a SynonymLexicon>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{embed_class, fixed_feature_vector, Providers};
    use crate::ontology::ClassRecord;

    struct Fixture {
        profiles: Vec<ClassProfile>,
        features: FeatureVector,
    }

    fn fixture(s: ClassRecord, t: ClassRecord) -> Fixture {
        let p = Providers::builtin();
        let features = fixed_feature_vector(&s, &embed_class(&s, &p).unwrap(), &t, &embed_class(&t, &p).unwrap());
        let (ss, _) = OntologySchema::from_classes("s", vec![s]).unwrap();
        let (ts, _) = OntologySchema::from_classes("t", vec![t]).unwrap();
        let mut profiles = profile_schema(&ss);
        profiles.extend(profile_schema(&ts));
        Fixture { profiles, features }
    }

    fn vote(lf: InitialLf, s: ClassRecord, t: ClassRecord, lexicon: Option<&SynonymLexicon>) -> WeakLabel {
        let f = fixture(s, t);
        lf.evaluate(&PairView { source: &f.profiles[0], target: &f.profiles[1], features: &f.features, lexicon })
    }

    fn named(name: &str) -> ClassRecord {
        ClassRecord::new(format!("x#{name}"), name)
    }

    #[test]
    fn ids_round_trip_and_unknown_rejected() {
        for lf in InitialLf::ALL {
            assert_eq!(InitialLf::from_id(lf.id()).unwrap(), lf);
        }
        assert!(matches!(InitialLf::from_id("LF_nope"), Err(Error::UnknownFunction(_))));
    }

    #[test]
    fn name_equal() {
        assert_eq!(vote(InitialLf::ClassNameEqual, named("Paper"), named("Paper"), None), WeakLabel::Match);
        assert_eq!(vote(InitialLf::ClassNameEqual, named("Paper"), named("Author"), None), WeakLabel::Abstain);
    }

    #[test]
    fn label_equal_abstains_on_empty() {
        assert_eq!(vote(InitialLf::LabelEqual, named("Paper"), named("Paper"), None), WeakLabel::Abstain);
        let mut a = named("Paper");
        a.label = "Paper".into();
        let mut b = named("Article");
        b.label = "paper".into();
        assert_eq!(vote(InitialLf::LabelEqual, a, b, None), WeakLabel::Match);
    }

    #[test]
    fn stemmer_golden() {
        let s = stemmer();
        let cases = [
            ("papers", "paper"),
            ("paper", "paper"),
            ("reviewing", "review"),
            ("reviewer", "review"),
            ("authors", "author"),
            ("accepted", "accept"),
            ("conferences", "confer"),
        ];
        for (word, stem) in cases {
            assert_eq!(s.stem(word), stem, "{word}");
        }
        assert_eq!(vote(InitialLf::ClassNameStemmedEqual, named("Papers"), named("Paper"), None), WeakLabel::Match);
    }

    #[test]
    fn acronyms() {
        assert_eq!(vote(InitialLf::Acronyms, named("ProgramCommittee"), named("PC"), None), WeakLabel::Match);
        assert_eq!(vote(InitialLf::Acronyms, named("PC"), named("ProgramCommittee"), None), WeakLabel::Match);
        assert_eq!(vote(InitialLf::Acronyms, named("Paper"), named("PC"), None), WeakLabel::Abstain);
        assert_eq!(vote(InitialLf::Acronyms, named("ProgramCommittee"), named("Chair"), None), WeakLabel::Abstain);
    }

    #[test]
    fn synonyms_need_a_lexicon() {
        let lex = SynonymLexicon::parse(r#"{"paper": ["article"]}"#).unwrap();
        assert_eq!(
            vote(InitialLf::ClassNameSynonyms, named("ConferencePaper"), named("ConferenceArticle"), None),
            WeakLabel::Abstain
        );
        assert_eq!(
            vote(InitialLf::ClassNameSynonyms, named("ConferencePaper"), named("ConferenceArticle"), Some(&lex)),
            WeakLabel::Match
        );
        assert_eq!(
            vote(InitialLf::ClassNameSynonyms, named("Author"), named("Writer"), Some(&lex)),
            WeakLabel::Abstain
        );
    }

    #[test]
    fn root_nouns() {
        assert_eq!(
            vote(InitialLf::RootNounsEqual, named("ConferencePaper"), named("JournalPaper"), None),
            WeakLabel::Match
        );
        assert_eq!(
            vote(InitialLf::RootNounsEqual, named("PaperAuthor"), named("JournalPaper"), None),
            WeakLabel::Abstain
        );
    }

    #[test]
    fn name_distance_bands() {
        // "conference paper" vs "conference papers": 1 - 1/17.
        assert_eq!(
            vote(InitialLf::ClassNameDistance, named("ConferencePaper"), named("ConferencePapers"), None),
            WeakLabel::Match
        );
        // 1 - 1/9 = 0.89: abstain band.
        assert_eq!(vote(InitialLf::ClassNameDistance, named("Reviewer"), named("Reviewers"), None), WeakLabel::Abstain);
        assert_eq!(vote(InitialLf::ClassNameDistance, named("Paper"), named("Author"), None), WeakLabel::NoMatch);
    }

    #[test]
    fn segment_overlap() {
        assert_eq!(
            vote(InitialLf::NameSegmentOverlap, named("PaperReview"), named("Review_Paper"), None),
            WeakLabel::Match
        );
        assert_eq!(vote(InitialLf::NameSegmentOverlap, named("PaperReview"), named("Paper"), None), WeakLabel::NoMatch);
        assert_eq!(vote(InitialLf::LabelWordsOverlap, named("A"), named("A"), None), WeakLabel::Abstain);
    }

    #[test]
    fn structure_overlap_rules() {
        let with = |name: &str, props: &[&str]| {
            let mut c = named(name);
            c.properties = props.iter().map(|p| p.to_string()).collect();
            c
        };
        assert_eq!(
            vote(
                InitialLf::PropertiesOverlap,
                with("A", &["hasAuthor", "hasTitle"]),
                with("B", &["has_author", "has_title", "x"]),
                None
            ),
            WeakLabel::Match
        );
        assert_eq!(
            vote(InitialLf::PropertiesOverlap, with("A", &["hasAuthor"]), with("B", &["hasAuthor"]), None),
            WeakLabel::NoMatch
        );
        assert_eq!(
            vote(InitialLf::PropertiesOverlap, with("A", &[]), with("B", &["hasAuthor"]), None),
            WeakLabel::Abstain
        );
        assert_eq!(vote(InitialLf::SubclassesOverlap, named("A"), named("B"), None), WeakLabel::Abstain);
    }

    #[test]
    fn embedding_functions() {
        assert_eq!(
            vote(InitialLf::ClassNameSimilarity, named("ConferencePaper"), named("ConferencePaper"), None),
            WeakLabel::Match
        );
        assert_eq!(vote(InitialLf::ClassNameSimilarity, named("Paper"), named("Committee"), None), WeakLabel::NoMatch);
        assert_eq!(vote(InitialLf::CommentSimilarity, named("Paper"), named("Paper"), None), WeakLabel::Abstain);
    }

    #[test]
    fn evaluation_is_pure() {
        let a = vote(InitialLf::ClassNameDistance, named("Reviewing"), named("Reviewer"), None);
        let b = vote(InitialLf::ClassNameDistance, named("Reviewing"), named("Reviewer"), None);
        assert_eq!(a, b);
    }
}
