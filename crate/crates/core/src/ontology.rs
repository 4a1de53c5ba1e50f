//! Canonical in-memory ontologies, ground-truth alignments and the matching
//! task container.
//!
//! Input is the JSON ontology format:
//! `{"id": .., "classes": [{"iri", "name", "label", "comment", "superclasses",
//! "subclasses", "properties"}]}` and alignments as
//! `{"matches": [{"source": iri, "target": iri}]}`.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub iri: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub comment: String,
    #[serde(default)]
    pub superclasses: BTreeSet<String>,
    #[serde(default)]
    pub subclasses: BTreeSet<String>,
    #[serde(default)]
    pub properties: BTreeSet<String>,
}

impl ClassRecord {
    pub fn new(iri: impl Into<String>, name: impl Into<String>) -> Self {
        ClassRecord {
            iri: iri.into(),
            name: name.into(),
            label: String::new(),
            comment: String::new(),
            superclasses: BTreeSet::new(),
            subclasses: BTreeSet::new(),
            properties: BTreeSet::new(),
        }
    }

    pub fn attribute(&self, attr: Attribute) -> &str {
        match attr {
            Attribute::Name => &self.name,
            Attribute::Label => &self.label,
            Attribute::Comment => &self.comment,
        }
    }
}

/// The three textual class attributes the matcher reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Name,
    Label,
    Comment,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Name, Attribute::Label, Attribute::Comment];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Name => "name",
            Attribute::Label => "label",
            Attribute::Comment => "comment",
        }
    }
}

/// An ontology: classes sorted by iri.
#[derive(Debug, Clone)]
pub struct OntologySchema {
    pub id: String,
    classes: Vec<ClassRecord>,
    index: HashMap<String, usize>,
}

impl PartialEq for OntologySchema {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.classes == other.classes
    }
}

#[derive(Serialize, Deserialize)]
struct OntologyDoc {
    id: String,
    classes: Vec<ClassRecord>,
}

/// Result of parsing one ontology document.
#[derive(Debug, Clone)]
pub struct ParsedOntology {
    pub schema: OntologySchema,
    /// Hierarchy references that did not resolve and were dropped.
    pub dangling_references: usize,
}

impl OntologySchema {
    /// Builds a schema, sorting classes and dropping dangling hierarchy links.
    /// Returns the schema and the number of dropped references.
    pub fn from_classes(id: impl Into<String>, mut classes: Vec<ClassRecord>) -> Result<(Self, usize)> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::InvalidOntology("ontology id is empty".into()));
        }
        if classes.is_empty() {
            return Err(Error::InvalidOntology(format!("ontology `{id}` has no classes")));
        }
        let mut seen = HashSet::new();
        for class in &mut classes {
            if class.iri.is_empty() {
                return Err(Error::InvalidOntology(format!("class without iri in `{id}`")));
            }
            if !seen.insert(class.iri.clone()) {
                return Err(Error::DuplicateIri(class.iri.clone()));
            }
            if class.name.trim().is_empty() {
                class.name = local_name(&class.iri).to_string();
            }
            if class.name.trim().is_empty() {
                return Err(Error::InvalidOntology(format!("class `{}` has no name", class.iri)));
            }
        }
        let mut dangling = 0;
        for class in &mut classes {
            for set in [&mut class.superclasses, &mut class.subclasses] {
                let before = set.len();
                set.retain(|iri| seen.contains(iri));
                dangling += before - set.len();
            }
        }
        classes.sort_by(|a, b| a.iri.cmp(&b.iri));
        let index = classes.iter().enumerate().map(|(i, c)| (c.iri.clone(), i)).collect();
        Ok((OntologySchema { id, classes, index }, dangling))
    }

    pub fn classes(&self) -> &[ClassRecord] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, idx: usize) -> &ClassRecord {
        &self.classes[idx]
    }

    pub fn index_of(&self, iri: &str) -> Option<usize> {
        self.index.get(iri).copied()
    }

    pub fn by_iri(&self, iri: &str) -> Option<&ClassRecord> {
        self.index_of(iri).map(|i| &self.classes[i])
    }
}

pub fn parse_ontology(doc: &str) -> Result<ParsedOntology> {
    let parsed: OntologyDoc = serde_json::from_str(doc).map_err(|e| Error::json("ontology", e))?;
    let (schema, dangling_references) = OntologySchema::from_classes(parsed.id, parsed.classes)?;
    Ok(ParsedOntology { schema, dangling_references })
}

pub fn serialize_ontology(schema: &OntologySchema) -> String {
    let doc = OntologyDoc { id: schema.id.clone(), classes: schema.classes.clone() };
    serde_json::to_string_pretty(&doc).expect("ontology serializes")
}

/// Equivalences between source and target classes, by iri.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub pairs: BTreeSet<(String, String)>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, source: &str, target: &str) -> bool {
        // BTreeSet<(String, String)> cannot be probed with borrowed tuples.
        self.pairs.contains(&(source.to_string(), target.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentMatch {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentDoc {
    pub matches: Vec<AlignmentMatch>,
}

/// What happened while loading an alignment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentReport {
    pub retained: usize,
    pub duplicates: usize,
    pub rejected: Vec<(String, String)>,
}

pub fn load_alignment(
    doc: &str,
    source: &OntologySchema,
    target: &OntologySchema,
) -> Result<(GroundTruth, AlignmentReport)> {
    let parsed: AlignmentDoc = serde_json::from_str(doc).map_err(|e| Error::json("alignment", e))?;
    let mut truth = GroundTruth::default();
    let mut report = AlignmentReport::default();
    for m in parsed.matches {
        if source.index_of(&m.source).is_none() || target.index_of(&m.target).is_none() {
            report.rejected.push((m.source, m.target));
            continue;
        }
        if !truth.pairs.insert((m.source, m.target)) {
            report.duplicates += 1;
        }
    }
    report.retained = truth.len();
    Ok((truth, report))
}

pub fn serialize_alignment(pairs: impl IntoIterator<Item = (String, String)>) -> String {
    let doc =
        AlignmentDoc { matches: pairs.into_iter().map(|(source, target)| AlignmentMatch { source, target }).collect() };
    serde_json::to_string_pretty(&doc).expect("alignment serializes")
}

/// A source/target ontology pair, optionally with its reference alignment.
#[derive(Debug, Clone)]
pub struct MatchTask {
    pub source: OntologySchema,
    pub target: OntologySchema,
    pub truth: Option<GroundTruth>,
}

impl MatchTask {
    pub fn new(source: OntologySchema, target: OntologySchema, truth: Option<GroundTruth>) -> Result<Self> {
        if source.id == target.id {
            return Err(Error::InvalidOntology(format!("source and target share the id `{}`", source.id)));
        }
        if let Some(truth) = &truth {
            for (s, t) in &truth.pairs {
                if source.index_of(s).is_none() || target.index_of(t).is_none() {
                    return Err(Error::InvalidOntology(format!("ground truth pair ({s}, {t}) does not resolve")));
                }
            }
        }
        Ok(MatchTask { source, target, truth })
    }

    pub fn id(&self) -> String {
        format!("{}--{}", self.source.id, self.target.id)
    }
}

/// |E_S| * |E_T|: size of the unblocked cross product.
pub fn candidate_universe(task: &MatchTask) -> u64 {
    task.source.len() as u64 * task.target.len() as u64
}

/// Local part of an iri: text after the last `#`, else after the last `/`.
pub fn local_name(iri: &str) -> &str {
    iri.rsplit_once('#').map(|(_, n)| n).or_else(|| iri.rsplit_once('/').map(|(_, n)| n)).unwrap_or(iri)
}

/// Splits on camelCase boundaries, underscores, hyphens and whitespace (any
/// non-alphanumeric character is a separator) and lowercases the tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        if c.is_uppercase() && !current.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                tokens.push(std::mem::take(&mut current));
            }
        }
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokens joined by single spaces; the canonical comparison form of a name.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(doc: &str) -> ParsedOntology {
        parse_ontology(doc).unwrap()
    }

    #[test]
    fn minimal_document() {
        let p = schema(r#"{"id":"s","classes":[{"iri":"a#Paper","name":"Paper"}]}"#);
        assert_eq!(p.schema.len(), 1);
        let c = p.schema.get(0);
        assert!(c.superclasses.is_empty() && c.subclasses.is_empty());
        assert_eq!(c.label, "");
        assert_eq!(p.dangling_references, 0);
    }

    #[test]
    fn dangling_superclass_is_dropped() {
        let p = schema(r#"{"id":"s","classes":[{"iri":"a#Paper","name":"Paper","superclasses":["a#Missing"]}]}"#);
        assert!(p.schema.get(0).superclasses.is_empty());
        assert_eq!(p.dangling_references, 1);
    }

    #[test]
    fn duplicate_iri_is_rejected() {
        let err =
            parse_ontology(r#"{"id":"s","classes":[{"iri":"a#X","name":"X"},{"iri":"a#X","name":"Y"}]}"#).unwrap_err();
        assert!(matches!(err, Error::DuplicateIri(ref iri) if iri == "a#X"), "{err}");
    }

    #[test]
    fn malformed_document_reports_position() {
        let err = parse_ontology("{\"id\": \"s\",\n \"classes\": [ }").unwrap_err();
        match err {
            Error::Parse { context, .. } => assert!(context.contains("line 2"), "{context}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn classes_sorted_and_lookup_works() {
        let p = schema(
            r#"{"id":"s","classes":[{"iri":"a#Z","name":"Z"},{"iri":"a#B","name":"B","superclasses":["a#Z"]}]}"#,
        );
        let iris: Vec<_> = p.schema.classes().iter().map(|c| c.iri.as_str()).collect();
        assert_eq!(iris, ["a#B", "a#Z"]);
        assert_eq!(p.schema.index_of("a#Z"), Some(1));
    }

    #[test]
    fn reparse_is_identity() {
        let doc = r#"{"id":"s","classes":[{"iri":"a#Z","name":"Z","label":"zed","properties":["p2","p1"]},{"iri":"a#B","name":"B","subclasses":["a#Z","a#Q"]}]}"#;
        let once = schema(doc).schema;
        let twice = schema(&serialize_ontology(&once)).schema;
        assert_eq!(once, twice);
    }

    fn two_schemas() -> (OntologySchema, OntologySchema) {
        let s = schema(r#"{"id":"s","classes":[{"iri":"s#A","name":"A"},{"iri":"s#B","name":"B"}]}"#).schema;
        let t = schema(r#"{"id":"t","classes":[{"iri":"t#A","name":"A"}]}"#).schema;
        (s, t)
    }

    #[test]
    fn alignment_dedup_and_rejection() {
        let (s, t) = two_schemas();
        let (truth, report) = load_alignment(r#"{"matches":[]}"#, &s, &t).unwrap();
        assert_eq!(truth.len(), 0);
        assert_eq!(report.retained, 0);

        let doc = r#"{"matches":[{"source":"s#A","target":"t#A"},{"source":"s#A","target":"t#A"},{"source":"s#Q","target":"t#A"}]}"#;
        let (truth, report) = load_alignment(doc, &s, &t).unwrap();
        assert_eq!(truth.len(), 1);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.rejected, vec![("s#Q".to_string(), "t#A".to_string())]);
    }

    #[test]
    fn task_requires_distinct_ids() {
        let (s, _) = two_schemas();
        assert!(MatchTask::new(s.clone(), s, None).is_err());
    }

    #[test]
    fn universe_is_product() {
        let mk = |id: &str, n: usize| {
            let classes = (0..n).map(|i| ClassRecord::new(format!("{id}#c{i}"), format!("C{i}"))).collect();
            OntologySchema::from_classes(id, classes).unwrap().0
        };
        assert_eq!(candidate_universe(&MatchTask::new(mk("s", 154), mk("t", 915), None).unwrap()), 140_910);
        assert_eq!(candidate_universe(&MatchTask::new(mk("s", 92), mk("t", 451), None).unwrap()), 41_492);
        assert_eq!(candidate_universe(&MatchTask::new(mk("s", 1), mk("t", 1), None).unwrap()), 1);
    }

    #[test]
    fn tokenizer_splits_camel_and_separators() {
        assert_eq!(tokenize("ConferencePaper"), ["conference", "paper"]);
        assert_eq!(tokenize("XMLParser_v2-draft  x"), ["xml", "parser", "v2", "draft", "x"]);
        assert_eq!(tokenize("has_Author"), ["has", "author"]);
        assert!(tokenize("  -_ ").is_empty());
        assert_eq!(normalize("Program_Committee"), "program committee");
    }

    #[test]
    fn local_names() {
        assert_eq!(local_name("http://x.org/onto#Paper"), "Paper");
        assert_eq!(local_name("http://x.org/onto/Paper"), "Paper");
        assert_eq!(local_name("Paper"), "Paper");
    }
}
