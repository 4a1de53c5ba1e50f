//! Embedding providers.
//!
//! Two provider slots (`provider-a`, `provider-b`) feed the embedding
//! distances and similarity keys. Vectors come either from an offline sidecar
//! file or from the built-in hashing embedder.
//!
//! Built-in hashing scheme, for a provider with id `ID` and dimensionality `D`:
//!
//! 1. `tokens = tokenize(text)` (camelCase / separator split, lowercased).
//! 2. For every token `t`, emit the character 3-grams of `"<" + t + ">"`.
//!    `provider-b` additionally emits `"w:" + t` for the whole token.
//! 3. Each emitted feature `f` is hashed with 64-bit FNV-1a over the bytes
//!    `ID ++ [0x1f] ++ f`. Bucket `h % D` receives `+1` when bit 63 of `h` is
//!    clear and `-1` when it is set.
//! 4. The accumulated vector is scaled to unit L2 norm. Text without tokens
//!    yields the zero vector flagged as empty.

use std::collections::HashMap;
use std::hash::Hasher;
use std::io::BufRead;

use fnv::FnvHasher;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ontology::{tokenize, Attribute};

pub const PROVIDER_A: &str = "provider-a";
pub const PROVIDER_B: &str = "provider-b";
pub const DEFAULT_DIMENSIONALITY: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f32>,
    empty: bool,
}

impl Embedding {
    pub fn empty(dim: usize) -> Self {
        Embedding { values: vec![0.0; dim], empty: true }
    }

    pub fn from_values(values: Vec<f32>) -> Self {
        Embedding { values, empty: false }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn dimensionality(&self) -> usize {
        self.values.len()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dimensionality(&self) -> usize;
    /// Embeds one attribute of one class.
    fn embed_attribute(&self, iri: &str, attribute: Attribute, text: &str) -> Result<Embedding>;
}

#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    id: String,
    dim: usize,
    whole_words: bool,
}

impl HashingEmbedder {
    pub fn new(id: impl Into<String>, dim: usize, whole_words: bool) -> Self {
        assert!(dim > 0, "dimensionality must be positive");
        HashingEmbedder { id: id.into(), dim, whole_words }
    }

    pub fn provider_a() -> Self {
        Self::new(PROVIDER_A, DEFAULT_DIMENSIONALITY, false)
    }

    pub fn provider_b() -> Self {
        Self::new(PROVIDER_B, DEFAULT_DIMENSIONALITY, true)
    }

    fn bucket(&self, feature: &str) -> (usize, f32) {
        let mut h = FnvHasher::default();
        h.write(self.id.as_bytes());
        h.write(&[0x1f]);
        h.write(feature.as_bytes());
        let h = h.finish();
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.dim as u64) as usize, sign)
    }

    pub fn embed(&self, text: &str) -> Embedding {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Embedding::empty(self.dim);
        }
        let mut acc = vec![0.0f64; self.dim];
        for token in &tokens {
            let padded: Vec<char> = std::iter::once('<').chain(token.chars()).chain(std::iter::once('>')).collect();
            for gram in padded.windows(3) {
                let (i, s) = self.bucket(&gram.iter().collect::<String>());
                acc[i] += s as f64;
            }
            if self.whole_words {
                let (i, s) = self.bucket(&format!("w:{token}"));
                acc[i] += s as f64;
            }
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values = if norm > 0.0 { acc.iter().map(|v| (v / norm) as f32).collect() } else { vec![0.0; self.dim] };
        Embedding::from_values(values)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimensionality(&self) -> usize {
        self.dim
    }

    fn embed_attribute(&self, _iri: &str, _attribute: Attribute, text: &str) -> Result<Embedding> {
        Ok(self.embed(text))
    }
}

/// Vectors exported offline. Keys are `"<iri>|<attribute>|<provider-id>"`.
#[derive(Debug, Clone)]
pub struct FileEmbeddings {
    id: String,
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

#[derive(Deserialize)]
struct SidecarRecord {
    key: String,
    vector: Vec<f32>,
}

pub fn sidecar_key(iri: &str, attribute: Attribute, provider: &str) -> String {
    format!("{iri}|{}|{provider}", attribute.as_str())
}

impl FileEmbeddings {
    /// Reads a JSON-lines sidecar and splits it per provider id.
    pub fn load_sidecar(reader: impl BufRead) -> Result<HashMap<String, FileEmbeddings>> {
        let mut out: HashMap<String, FileEmbeddings> = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SidecarRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                context: format!("embedding sidecar line {}", n + 1),
                message: e.to_string(),
            })?;
            let provider = rec
                .key
                .rsplit('|')
                .next()
                .filter(|_| rec.key.matches('|').count() >= 2)
                .ok_or_else(|| Error::Parse {
                    context: format!("embedding sidecar line {}", n + 1),
                    message: format!("key `{}` is not <iri>|<attribute>|<provider-id>", rec.key),
                })?
                .to_string();
            let entry = out.entry(provider.clone()).or_insert_with(|| FileEmbeddings {
                id: provider,
                dim: rec.vector.len(),
                vectors: HashMap::new(),
            });
            if rec.vector.len() != entry.dim {
                return Err(Error::DimensionMismatch { left: entry.dim, right: rec.vector.len() });
            }
            entry.vectors.insert(rec.key, rec.vector);
        }
        Ok(out)
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimensionality(&self) -> usize {
        self.dim
    }

    fn embed_attribute(&self, iri: &str, attribute: Attribute, text: &str) -> Result<Embedding> {
        if tokenize(text).is_empty() {
            return Ok(Embedding::empty(self.dim));
        }
        let key = sidecar_key(iri, attribute, &self.id);
        let v = self.vectors.get(&key).ok_or(Error::MissingEmbedding(key))?;
        Ok(Embedding::from_values(v.clone()))
    }
}
