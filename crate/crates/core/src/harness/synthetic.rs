//! Seeded synthetic matching tasks. Matched target classes are perturbed
//! copies of source classes; everything else is drawn fresh from the same
//! vocabulary, so non-matches routinely share words with matches.
//!
//! The number of true matches is `round(match_rate * n_source * min(50,
//! n_target))`, i.e. the rate is relative to the blocked candidate scale,
//! capped at `min(n_source, n_target)`.

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::SynonymLexicon;
use crate::ontology::{tokenize, ClassRecord, GroundTruth, MatchTask, OntologySchema};

const HEADS: &[&str] = &[
    "paper",
    "author",
    "review",
    "reviewer",
    "conference",
    "committee",
    "chair",
    "session",
    "track",
    "workshop",
    "tutorial",
    "event",
    "person",
    "member",
    "attendee",
    "speaker",
    "organizer",
    "sponsor",
    "document",
    "abstract",
    "submission",
    "decision",
    "acceptance",
    "rejection",
    "presentation",
    "poster",
    "demo",
    "proceedings",
    "volume",
    "publisher",
    "journal",
    "article",
    "topic",
    "keyword",
    "deadline",
    "registration",
    "fee",
    "payment",
    "invoice",
    "hotel",
    "venue",
    "room",
    "building",
    "city",
    "country",
    "address",
    "organization",
    "institution",
    "university",
    "company",
    "department",
    "group",
    "project",
    "grant",
    "award",
    "prize",
    "invitation",
    "letter",
    "email",
    "contract",
    "policy",
    "rule",
    "criterion",
    "score",
    "rating",
    "comment",
    "report",
    "summary",
    "schedule",
    "program",
    "agenda",
    "slot",
    "break",
    "meal",
    "dinner",
    "reception",
    "banquet",
    "excursion",
    "trip",
    "ticket",
    "badge",
    "certificate",
    "license",
    "copyright",
    "version",
    "draft",
    "revision",
    "camera",
    "format",
    "template",
    "style",
    "page",
    "figure",
    "table",
    "appendix",
    "reference",
    "citation",
    "index",
    "catalog",
];

const MODIFIERS: &[&str] = &[
    "accepted",
    "rejected",
    "invited",
    "regular",
    "short",
    "long",
    "full",
    "student",
    "senior",
    "junior",
    "external",
    "internal",
    "local",
    "international",
    "national",
    "main",
    "special",
    "final",
    "initial",
    "early",
    "late",
    "online",
    "physical",
    "hybrid",
    "public",
    "private",
    "official",
    "contributed",
    "keynote",
    "panel",
    "industrial",
    "academic",
    "technical",
    "social",
    "financial",
    "general",
    "program",
    "steering",
    "organizing",
    "publicity",
    "publication",
    "registration",
    "conference",
    "workshop",
    "poster",
    "demo",
    "best",
    "primary",
    "secondary",
    "co",
];

const FILLER: &[&str] = &[
    "that",
    "which",
    "is",
    "are",
    "by",
    "for",
    "of",
    "the",
    "a",
    "to",
    "with",
    "in",
    "on",
    "and",
    "each",
    "every",
    "one",
    "some",
    "all",
    "any",
    "usually",
    "typically",
    "formally",
    "officially",
];

const VERBS: &[&str] = &[
    "submitted",
    "written",
    "assigned",
    "reviewed",
    "organized",
    "held",
    "paid",
    "issued",
    "published",
    "presented",
    "registered",
    "scheduled",
    "managed",
    "funded",
    "selected",
    "evaluated",
    "signed",
    "approved",
    "attended",
    "prepared",
    "described",
    "listed",
    "stored",
    "referenced",
    "sent",
];

const SYNONYMS: &[&[&str]] = &[
    &["paper", "article", "manuscript"],
    &["author", "writer", "creator"],
    &["review", "assessment", "evaluation"],
    &["reviewer", "referee", "assessor"],
    &["conference", "congress", "symposium"],
    &["committee", "board", "panel"],
    &["chair", "chairperson", "head"],
    &["person", "individual", "human"],
    &["attendee", "participant", "delegate"],
    &["speaker", "presenter", "lecturer"],
    &["organizer", "coordinator"],
    &["document", "record", "file"],
    &["submission", "entry", "contribution"],
    &["decision", "verdict", "outcome"],
    &["venue", "location", "site"],
    &["organization", "organisation", "body"],
    &["university", "college"],
    &["company", "firm", "enterprise"],
    &["award", "honor"],
    &["fee", "charge", "cost"],
    &["schedule", "timetable", "calendar"],
    &["meal", "food"],
    &["dinner", "supper"],
    &["trip", "tour", "journey"],
    &["ticket", "pass"],
    &["topic", "subject", "theme"],
    &["deadline", "due"],
    &["accepted", "approved"],
    &["rejected", "declined"],
    &["invited", "requested"],
    &["short", "brief"],
    &["student", "pupil", "learner"],
    &["final", "last"],
    &["early", "initial"],
];

const ABBREVIATIONS: &[(&str, &str)] = &[
    ("conference", "conf"),
    ("organization", "org"),
    ("program", "prog"),
    ("document", "doc"),
    ("information", "info"),
    ("registration", "reg"),
    ("international", "intl"),
    ("department", "dept"),
    ("university", "univ"),
    ("presentation", "pres"),
    ("publication", "pub"),
    ("technical", "tech"),
    ("committee", "comm"),
    ("proceedings", "proc"),
    ("reference", "ref"),
    ("certificate", "cert"),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_source: usize,
    pub n_target: usize,
    pub match_rate: f64,
    /// Perturbation intensity in [0, 1]: the share of hard perturbations;
    /// mild ones make up a further 2x that share. 0 gives identical copies.
    pub noise: f64,
    /// Share of matched classes renamed to unrelated tokens; only the
    /// description, properties and hierarchy still tie them to the source.
    #[serde(default)]
    pub rename: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    Identical,
    Restyle,
    Plural,
    Synonym,
    Abbreviation,
    Typo,
    Reorder,
    AddWord,
    DropWord,
    Rename,
}

impl Perturbation {
    pub fn is_hard(self) -> bool {
        !matches!(self, Perturbation::Identical | Perturbation::Restyle | Perturbation::Plural)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub task: MatchTask,
    /// The synonym groups the generator draws from, for runs that want a lexicon.
    pub lexicon: SynonymLexicon,
    /// (target iri, perturbation) of each matched pair.
    pub perturbations: Vec<(String, Perturbation)>,
}

pub fn expected_matches(n_source: usize, n_target: usize, match_rate: f64) -> usize {
    let raw = (match_rate * n_source as f64 * n_target.min(50) as f64).round() as usize;
    raw.max(1).min(n_source.min(n_target))
}

/// Class content before it becomes a record.
#[derive(Debug, Clone)]
struct Concept {
    tokens: Vec<String>,
    description: Vec<String>,
    properties: Vec<String>,
    parent: Option<usize>,
}

fn camel(tokens: &[String]) -> String {
    tokens
        .iter()
        .map(|t| {
            let mut c = t.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect::<String>(),
                None => String::new(),
            }
        })
        .collect()
}

fn snake(tokens: &[String]) -> String {
    let parts: Vec<String> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| if i == 0 { camel(std::slice::from_ref(t)) } else { t.clone() })
        .collect();
    parts.join("_")
}

fn random_tokens(rng: &mut ChaCha8Rng) -> Vec<String> {
    let modifiers = match rng.random_range(0..10) {
        0..=2 => 0,
        3..=7 => 1,
        _ => 2,
    };
    let mut tokens: Vec<String> = (0..modifiers).map(|_| MODIFIERS.choose(rng).unwrap().to_string()).collect();
    tokens.dedup();
    tokens.push(HEADS.choose(rng).unwrap().to_string());
    if tokens.len() >= 2 && tokens[tokens.len() - 2] == tokens[tokens.len() - 1] {
        tokens.remove(0);
    }
    tokens
}

fn random_description(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut words = vec![VERBS.choose(rng).unwrap().to_string()];
    let n = rng.random_range(3..6);
    for _ in 0..n {
        words.push(HEADS.choose(rng).unwrap().to_string());
    }
    words
}

fn random_properties(rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = rng.random_range(0..5);
    let mut props: BTreeSet<String> = BTreeSet::new();
    for _ in 0..n {
        let noun = HEADS.choose(rng).unwrap();
        props.insert(format!("has{}", camel(&[noun.to_string()])));
    }
    props.into_iter().collect()
}

fn comment_text(rng: &mut ChaCha8Rng, tokens: &[String], description: &[String]) -> String {
    let article = if tokens[0].starts_with(['a', 'e', 'i', 'o', 'u']) { "An" } else { "A" };
    let mut words = vec![article.to_string()];
    words.extend(tokens.iter().cloned());
    words.push(FILLER.choose(rng).unwrap().to_string());
    for (i, w) in description.iter().enumerate() {
        words.push(w.clone());
        if i + 1 < description.len() && rng.random_bool(0.4) {
            words.push(FILLER.choose(rng).unwrap().to_string());
        }
    }
    words.join(" ") + "."
}

fn synonym_of(rng: &mut ChaCha8Rng, word: &str) -> Option<String> {
    let group = SYNONYMS.iter().find(|g| g.contains(&word))?;
    let options: Vec<&&str> = group.iter().filter(|w| **w != word).collect();
    options.choose(rng).map(|w| w.to_string())
}

fn typo(rng: &mut ChaCha8Rng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.len() < 4 {
        chars.push(chars[chars.len() - 1]);
        return chars.into_iter().collect();
    }
    let i = rng.random_range(1..chars.len() - 1);
    if rng.random_bool(0.5) {
        chars.swap(i, i + 1);
    } else {
        chars.remove(i);
    }
    chars.into_iter().collect()
}

/// A hard perturbation of the name tokens; falls through to the next kind
/// when one is not applicable.
fn hard_tokens(rng: &mut ChaCha8Rng, tokens: &[String]) -> (Vec<String>, Perturbation) {
    let kinds = [
        Perturbation::Synonym,
        Perturbation::Abbreviation,
        Perturbation::Typo,
        Perturbation::Reorder,
        Perturbation::AddWord,
        Perturbation::DropWord,
    ];
    let first = rng.random_range(0..kinds.len());
    for step in 0..kinds.len() {
        let kind = kinds[(first + step) % kinds.len()];
        let mut out = tokens.to_vec();
        let applied = match kind {
            Perturbation::Synonym => {
                let idx: Vec<usize> = (0..out.len()).filter(|&i| synonym_of(rng, &out[i]).is_some()).collect();
                match idx.choose(rng) {
                    Some(&i) => {
                        out[i] = synonym_of(rng, &out[i]).unwrap();
                        true
                    }
                    None => false,
                }
            }
            Perturbation::Abbreviation => {
                let idx: Vec<usize> =
                    (0..out.len()).filter(|&i| ABBREVIATIONS.iter().any(|(w, _)| *w == out[i])).collect();
                match idx.choose(rng) {
                    Some(&i) => {
                        out[i] = ABBREVIATIONS.iter().find(|(w, _)| *w == out[i]).unwrap().1.to_string();
                        true
                    }
                    None => false,
                }
            }
            Perturbation::Typo => {
                let i = out.iter().enumerate().max_by_key(|(_, t)| t.len()).map(|(i, _)| i).unwrap();
                out[i] = typo(rng, &out[i]);
                true
            }
            Perturbation::Reorder if out.len() >= 2 => {
                out.rotate_left(1);
                true
            }
            Perturbation::AddWord => {
                out.insert(0, MODIFIERS.choose(rng).unwrap().to_string());
                out.dedup();
                out.len() > tokens.len()
            }
            Perturbation::DropWord if out.len() >= 2 => {
                out.remove(0);
                true
            }
            _ => false,
        };
        if applied && out != tokens {
            return (out, kind);
        }
    }
    let mut out = tokens.to_vec();
    out.insert(0, "other".to_string());
    (out, Perturbation::AddWord)
}

fn reword(rng: &mut ChaCha8Rng, description: &[String], share: f64) -> Vec<String> {
    let mut out: Vec<String> = description
        .iter()
        .map(|w| {
            if rng.random_bool(share) {
                synonym_of(rng, w).unwrap_or_else(|| HEADS.choose(rng).unwrap().to_string())
            } else {
                w.clone()
            }
        })
        .collect();
    if rng.random_bool(share) {
        out.shuffle(rng);
    }
    out
}

pub fn generate_synthetic_task(spec: &SyntheticSpec) -> Result<SyntheticTask> {
    if !(spec.match_rate > 0.0 && spec.match_rate <= 0.05) {
        return Err(Error::Config(format!("match rate must be in (0, 0.05], got {}", spec.match_rate)));
    }
    if spec.n_source == 0 || spec.n_target == 0 {
        return Err(Error::Config("both ontologies need at least one class".into()));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::Config(format!("noise must be in [0, 1], got {}", spec.noise)));
    }
    if !(0.0..=1.0).contains(&spec.rename) {
        return Err(Error::Config(format!("rename share must be in [0, 1], got {}", spec.rename)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_matches = expected_matches(spec.n_source, spec.n_target, spec.match_rate);

    let mut used_names: HashSet<String> = HashSet::new();
    let fresh = |rng: &mut ChaCha8Rng, used: &mut HashSet<String>| -> Vec<String> {
        loop {
            let t = random_tokens(rng);
            if used.insert(t.join(" ")) {
                return t;
            }
            // Fall back to a numbered name once the vocabulary is crowded.
            if rng.random_bool(0.05) {
                let mut t = t;
                t.push(format!("v{}", rng.random_range(2..1000)));
                if used.insert(t.join(" ")) {
                    return t;
                }
            }
        }
    };

    let source: Vec<Concept> = (0..spec.n_source)
        .map(|i| Concept {
            tokens: fresh(&mut rng, &mut used_names),
            description: random_description(&mut rng),
            properties: random_properties(&mut rng),
            parent: (i > 0 && rng.random_bool(0.7)).then(|| rng.random_range(0..i)),
        })
        .collect();

    let mut matched_sources: Vec<usize> = (0..spec.n_source).collect();
    matched_sources.shuffle(&mut rng);
    matched_sources.truncate(n_matches);
    matched_sources.sort_unstable();

    let mut target: Vec<Concept> = Vec::with_capacity(spec.n_target);
    let mut kinds: Vec<Option<Perturbation>> = Vec::with_capacity(spec.n_target);
    let mut target_of_source = vec![None; spec.n_source];
    for &s in &matched_sources {
        let src = &source[s];
        let u: f64 = rng.random();
        let (tokens, kind, desc_share) = if spec.rename > 0.0 && rng.random_bool(spec.rename) {
            (fresh(&mut rng, &mut used_names), Perturbation::Rename, 0.1)
        } else if u < spec.noise {
            let (t, k) = hard_tokens(&mut rng, &src.tokens);
            (t, k, 0.35)
        } else if u < (3.0 * spec.noise).min(1.0) {
            let mut t = src.tokens.clone();
            let k = if rng.random_bool(0.5) {
                Perturbation::Restyle
            } else {
                let last = t.len() - 1;
                if !t[last].ends_with('s') {
                    t[last].push('s');
                    Perturbation::Plural
                } else {
                    Perturbation::Restyle
                }
            };
            (t, k, 0.1)
        } else {
            (src.tokens.clone(), Perturbation::Identical, 0.0)
        };
        let mut tokens = tokens;
        while !matches!(kind, Perturbation::Identical | Perturbation::Restyle | Perturbation::Rename)
            && !used_names.insert(tokens.join(" "))
        {
            tokens.push(format!("v{}", rng.random_range(2..1000)));
        }
        let (description, properties) = if kind == Perturbation::Identical {
            (src.description.clone(), src.properties.clone())
        } else {
            let mut props = src.properties.clone();
            if kind.is_hard() && !props.is_empty() && rng.random_bool(0.3) {
                props.remove(rng.random_range(0..props.len()));
            }
            (reword(&mut rng, &src.description, desc_share), props)
        };
        target_of_source[s] = Some(target.len());
        target.push(Concept { tokens, description, properties, parent: None });
        kinds.push(Some(kind));
    }
    while target.len() < spec.n_target {
        let i = target.len();
        target.push(Concept {
            tokens: fresh(&mut rng, &mut used_names),
            description: random_description(&mut rng),
            properties: random_properties(&mut rng),
            parent: (i > 0 && rng.random_bool(0.7)).then(|| rng.random_range(0..i)),
        });
        kinds.push(None);
    }
    // Matched targets inherit the parent link when the parent is matched too.
    for &s in &matched_sources {
        let t = target_of_source[s].unwrap();
        target[t].parent = source[s].parent.and_then(|p| target_of_source[p]).filter(|&p| p != t);
    }

    // Shuffle target order so that matched classes are not clustered.
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.shuffle(&mut rng);
    let mut position = vec![0; target.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }

    let identical = spec.noise == 0.0;
    let make_records = |rng: &mut ChaCha8Rng, concepts: &[Concept], prefix: &str, restyle: &dyn Fn(usize) -> bool| {
        let names: Vec<String> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| if restyle(i) { snake(&c.tokens) } else { camel(&c.tokens) })
            .collect();
        let iris: Vec<String> = names.iter().map(|n| format!("{prefix}#{n}")).collect();
        let mut records: Vec<ClassRecord> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut r = ClassRecord::new(iris[i].clone(), names[i].clone());
                r.label = c.tokens.join(" ");
                r.comment = comment_text(rng, &c.tokens, &c.description);
                r.properties = c.properties.iter().cloned().collect();
                r
            })
            .collect();
        for (i, c) in concepts.iter().enumerate() {
            if let Some(p) = c.parent {
                records[i].superclasses.insert(iris[p].clone());
                let child = iris[i].clone();
                records[p].subclasses.insert(child);
            }
        }
        records
    };

    let src_prefix = format!("http://synthetic.example/{}/source", spec.seed);
    let tgt_prefix = format!("http://synthetic.example/{}/target", spec.seed);
    let mut source_records = make_records(&mut rng, &source, &src_prefix, &|_| false);
    let target_restyle = |i: usize| kinds[i] == Some(Perturbation::Restyle);
    let mut target_records = make_records(&mut rng, &target, &tgt_prefix, &target_restyle);

    // Identical copies must agree on every attribute, comment included.
    for &s in &matched_sources {
        let t = target_of_source[s].unwrap();
        if kinds[t] == Some(Perturbation::Identical) || identical {
            target_records[t].comment = source_records[s].comment.clone();
        }
    }

    let reordered: Vec<ClassRecord> = {
        let mut slots: Vec<Option<ClassRecord>> = vec![None; target_records.len()];
        for (old, rec) in target_records.drain(..).enumerate() {
            slots[position[old]] = Some(rec);
        }
        slots.into_iter().map(|r| r.unwrap()).collect()
    };
    let mut truth = GroundTruth::default();
    let mut perturbations = Vec::new();
    for &s in &matched_sources {
        let t = target_of_source[s].unwrap();
        let target_iri = reordered[position[t]].iri.clone();
        truth.pairs.insert((source_records[s].iri.clone(), target_iri.clone()));
        perturbations.push((target_iri, kinds[t].unwrap()));
    }
    let (source_schema, _) =
        OntologySchema::from_classes(format!("synthetic-{}-source", spec.seed), std::mem::take(&mut source_records))?;
    let (target_schema, _) = OntologySchema::from_classes(format!("synthetic-{}-target", spec.seed), reordered)?;
    let groups: Vec<Vec<String>> = SYNONYMS.iter().map(|g| g.iter().map(|w| w.to_string()).collect()).collect();
    Ok(SyntheticTask {
        task: MatchTask::new(source_schema, target_schema, Some(truth))?,
        lexicon: SynonymLexicon::from_groups(groups),
        perturbations,
    })
}

/// Name tokens, exposed for tests that inspect generated names.
pub fn name_tokens(record: &ClassRecord) -> Vec<String> {
    tokenize(&record.name)
}
