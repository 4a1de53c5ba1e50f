//! A blocked task with everything the loops read precomputed: candidate
//! features, class profiles and the initial functions' votes.

use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use crate::blocking::{blocking_report, generate_candidates, BlockingReport, CandidatePair, CandidateSet};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::{fixed_feature_vector, EmbeddedSchema, FeatureVector, FileEmbeddings, Providers};
use crate::labeling::{
    profile_schema, ClassProfile, FunctionVotes, InitialLf, LabelingFunction, PairView, SynonymLexicon,
};
use crate::ontology::{load_alignment, parse_ontology, GroundTruth, MatchTask};

pub const SOURCE_FILE: &str = "source.json";
pub const TARGET_FILE: &str = "target.json";
pub const ALIGNMENT_FILE: &str = "alignment.json";
pub const SYNONYMS_FILE: &str = "synonyms.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";

/// Inputs read from a task directory.
#[derive(Debug)]
pub struct TaskInputs {
    pub task: MatchTask,
    pub lexicon: Option<SynonymLexicon>,
    pub providers: Providers,
}

/// Loads `source.json`, `target.json` and the optional alignment, synonym
/// lexicon and embedding sidecar from `dir`.
pub fn load_task_dir(dir: &Path) -> Result<TaskInputs> {
    let read = |name: &str| -> Result<String> {
        fs::read_to_string(dir.join(name)).map_err(|e| Error::Config(format!("{}: {e}", dir.join(name).display())))
    };
    let source = parse_ontology(&read(SOURCE_FILE)?)?;
    let target = parse_ontology(&read(TARGET_FILE)?)?;
    for (which, parsed) in [("source", &source), ("target", &target)] {
        if parsed.dangling_references > 0 {
            log::warn!("{which}: dropped {} dangling hierarchy references", parsed.dangling_references);
        }
    }
    let truth = if dir.join(ALIGNMENT_FILE).exists() {
        let (truth, report) = load_alignment(&read(ALIGNMENT_FILE)?, &source.schema, &target.schema)?;
        if !report.rejected.is_empty() || report.duplicates > 0 {
            log::warn!("alignment: {} unresolved, {} duplicate entries", report.rejected.len(), report.duplicates);
        }
        Some(truth)
    } else {
        None
    };
    let lexicon =
        if dir.join(SYNONYMS_FILE).exists() { Some(SynonymLexicon::parse(&read(SYNONYMS_FILE)?)?) } else { None };
    let providers = if dir.join(EMBEDDINGS_FILE).exists() {
        let file = fs::File::open(dir.join(EMBEDDINGS_FILE))?;
        sidecar_providers(FileEmbeddings::load_sidecar(BufReader::new(file))?)?
    } else {
        Providers::builtin()
    };
    Ok(TaskInputs { task: MatchTask::new(source.schema, target.schema, truth)?, lexicon, providers })
}

/// Slot A takes the lexicographically first provider id, slot B the second;
/// a single provider fills both slots.
pub fn sidecar_providers(by_id: std::collections::HashMap<String, FileEmbeddings>) -> Result<Providers> {
    let mut ids: Vec<String> = by_id.keys().cloned().collect();
    ids.sort();
    let mut by_id = by_id;
    match ids.as_slice() {
        [only] => {
            let p = Arc::new(by_id.remove(only).expect("present"));
            Ok(Providers { a: p.clone(), b: p })
        }
        [a, b] => Ok(Providers {
            a: Arc::new(by_id.remove(a).expect("present")),
            b: Arc::new(by_id.remove(b).expect("present")),
        }),
        _ => Err(Error::Config(format!("embedding sidecar must hold one or two providers, found {}", ids.len()))),
    }
}

#[derive(Debug, Clone)]
pub struct TaskContext {
    pub task_id: String,
    pub source: EmbeddedSchema,
    pub target: EmbeddedSchema,
    pub source_profiles: Vec<ClassProfile>,
    pub target_profiles: Vec<ClassProfile>,
    pub lexicon: Option<SynonymLexicon>,
    pub candidates: CandidateSet,
    pub features: Vec<FeatureVector>,
    pub initial_votes: Vec<FunctionVotes>,
    pub truth: Option<GroundTruth>,
    /// Candidate indices of ground-truth pairs that survived blocking.
    pub truth_indices: Vec<usize>,
    pub blocking: BlockingReport,
}

impl TaskContext {
    pub fn build(task: MatchTask, lexicon: Option<SynonymLexicon>, providers: &Providers, exec: Exec) -> Result<Self> {
        let task_id = task.id();
        let source = EmbeddedSchema::new(task.source, providers, exec)?;
        let target = EmbeddedSchema::new(task.target, providers, exec)?;
        let candidates = generate_candidates(&source, &target, exec);
        Ok(Self::with_candidates(task_id, source, target, candidates, task.truth, lexicon, exec))
    }

    pub fn from_inputs(inputs: TaskInputs, exec: Exec) -> Result<Self> {
        Self::build(inputs.task, inputs.lexicon, &inputs.providers, exec)
    }

    pub fn with_candidates(
        task_id: String,
        source: EmbeddedSchema,
        target: EmbeddedSchema,
        candidates: CandidateSet,
        truth: Option<GroundTruth>,
        lexicon: Option<SynonymLexicon>,
        exec: Exec,
    ) -> Self {
        let features = exec.map(&candidates.pairs, |p| {
            fixed_feature_vector(
                source.schema.get(p.source),
                &source.embeddings[p.source],
                target.schema.get(p.target),
                &target.embeddings[p.target],
            )
        });
        let source_profiles = profile_schema(&source.schema);
        let target_profiles = profile_schema(&target.schema);
        let initial_votes = exec.map(&InitialLf::ALL, |&lf| {
            let votes = candidates
                .pairs
                .iter()
                .zip(&features)
                .map(|(p, features)| {
                    lf.evaluate(&PairView {
                        source: &source_profiles[p.source],
                        target: &target_profiles[p.target],
                        features,
                        lexicon: lexicon.as_ref(),
                    })
                })
                .collect();
            FunctionVotes::new(LabelingFunction::Initial { lf }, votes)
        });
        let blocking = blocking_report(&source, &target, &candidates, truth.as_ref());
        let mut truth_indices: Vec<usize> = truth
            .iter()
            .flat_map(|t| t.pairs.iter())
            .filter_map(|(s, t)| {
                let pair = CandidatePair { source: source.schema.index_of(s)?, target: target.schema.index_of(t)? };
                candidates.position(pair)
            })
            .collect();
        truth_indices.sort_unstable();
        TaskContext {
            task_id,
            source,
            target,
            source_profiles,
            target_profiles,
            lexicon,
            candidates,
            features,
            initial_votes,
            truth,
            truth_indices,
            blocking,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn truth_total(&self) -> usize {
        self.truth.as_ref().map_or(0, GroundTruth::len)
    }

    /// Ground-truth membership per candidate.
    pub fn truth_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for &i in &self.truth_indices {
            mask[i] = true;
        }
        mask
    }

    pub fn pair_iris(&self, idx: usize) -> (&str, &str) {
        let p = self.candidates.pairs[idx];
        (&self.source.schema.get(p.source).iri, &self.target.schema.get(p.target).iri)
    }

    pub fn index_of_iris(&self, source: &str, target: &str) -> Option<usize> {
        let pair = CandidatePair {
            source: self.source.schema.index_of(source)?,
            target: self.target.schema.index_of(target)?,
        };
        self.candidates.position(pair)
    }
}
