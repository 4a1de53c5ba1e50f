//! String and vector distances. Every distance lies in `[0, 1]`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ontology::tokenize;

/// Plain cosine similarity; 0 when either side is the zero vector.
pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { left: u.len(), right: v.len() });
    }
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked(u: &[f32], v: &[f32]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    if u == v {
        return 1.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// `1 - clamp(similarity, 0, 1)`.
pub fn embedding_distance(similarity: f64) -> f64 {
    1.0 - similarity.clamp(0.0, 1.0)
}

/// Edit distance over chars, divided by the longer length.
pub fn levenshtein_distance(a: &str, b: &str) -> f64 {
    let max = a.chars().count().max(b.chars().count());
    if max == 0 {
        return 0.0;
    }
    strsim::levenshtein(a, b) as f64 / max as f64
}

/// Positionwise mismatches over the shorter length plus the length
/// difference, divided by the longer length.
pub fn hamming_distance(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let max = a.len().max(b.len());
    if max == 0 {
        return 0.0;
    }
    let mismatches = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    (mismatches + a.len().abs_diff(b.len())) as f64 / max as f64
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// `1 - |A ∩ B| / max(|A|, |B|)` over token sets; 1 when both are empty.
pub fn word_overlap_distance(a: &str, b: &str) -> f64 {
    overlap_distance_sets(&token_set(a), &token_set(b))
}

pub(crate) fn overlap_distance_sets(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let max = a.len().max(b.len());
    if max == 0 {
        return 1.0;
    }
    1.0 - a.intersection(b).count() as f64 / max as f64
}

/// Jaccard similarity of two sets; 0 when both are empty.
pub(crate) fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine_similarity(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { left: 1, right: 2 })));
    }

    #[test]
    fn embedding_distance_clamps_negative() {
        assert_eq!(embedding_distance(-0.4), 1.0);
        assert_eq!(embedding_distance(1.0), 0.0);
        assert!((embedding_distance(0.25) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein_distance("Paper", "Paper"), 0.0);
        assert!((levenshtein_distance("Paper", "Papers") - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(levenshtein_distance("", "abc"), 1.0);
        assert_eq!(levenshtein_distance("", ""), 0.0);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance("abc", "abc"), 0.0);
        assert!((hamming_distance("abc", "abd") - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(hamming_distance("ab", "abcd"), 0.5);
        assert_eq!(hamming_distance("", ""), 0.0);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(word_overlap_distance("Conference Paper", "Paper"), 0.5);
        assert_eq!(word_overlap_distance("ConferencePaper", "paper conference"), 0.0);
        assert_eq!(word_overlap_distance("Author", "Paper"), 1.0);
        assert_eq!(word_overlap_distance("", ""), 1.0);
    }
}
