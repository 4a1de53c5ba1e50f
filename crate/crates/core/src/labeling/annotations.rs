use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The annotated set A: candidate index -> true label, insertion ordered and
/// append-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationStore {
    entries: Vec<(usize, bool)>,
    #[serde(skip)]
    by_pair: Vec<Option<bool>>,
}

impl AnnotationStore {
    pub fn new(candidates: usize) -> Self {
        AnnotationStore { entries: Vec::new(), by_pair: vec![None; candidates] }
    }

    pub fn from_entries(candidates: usize, entries: &[(usize, bool)]) -> Result<Self> {
        let mut store = Self::new(candidates);
        for &(pair, label) in entries {
            store.insert(pair, label)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, pair: usize, label: bool) -> Result<()> {
        match self.by_pair.get(pair) {
            None => Err(Error::Config(format!("pair {pair} is not a candidate"))),
            Some(Some(_)) => Err(Error::Config(format!("pair {pair} is already annotated"))),
            Some(None) => {
                self.by_pair[pair] = Some(label);
                self.entries.push((pair, label));
                Ok(())
            }
        }
    }

    pub fn label(&self, pair: usize) -> Option<bool> {
        self.by_pair.get(pair).copied().flatten()
    }

    pub fn contains(&self, pair: usize) -> bool {
        self.label(pair).is_some()
    }

    pub fn entries(&self) -> &[(usize, bool)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidates(&self) -> usize {
        self.by_pair.len()
    }

    pub fn matches(&self) -> usize {
        self.entries.iter().filter(|(_, l)| *l).count()
    }

    /// The first `n` annotations as an independent store.
    pub fn prefix(&self, n: usize) -> AnnotationStore {
        let mut store = Self::new(self.by_pair.len());
        for &(pair, label) in &self.entries[..n.min(self.entries.len())] {
            store.by_pair[pair] = Some(label);
            store.entries.push((pair, label));
        }
        store
    }
}
