use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Synonym lexicon: JSON map `token -> [synonyms]`. Entries are merged into
/// symmetric synonym groups; every token maps to its group representative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    canonical: HashMap<String, String>,
}

impl SynonymLexicon {
    pub fn parse(doc: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(doc).map_err(|e| Error::json("synonym lexicon", e))?;
        Ok(Self::from_groups(raw.into_iter().map(|(k, mut v)| {
            v.push(k);
            v
        })))
    }

    pub fn from_groups<I, G>(groups: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = String>,
    {
        // Union-find over lowercased tokens.
        let mut parent: HashMap<String, String> = HashMap::new();
        fn find(parent: &mut HashMap<String, String>, x: &str) -> String {
            let p = parent.get(x).cloned().unwrap_or_else(|| x.to_string());
            if p == x {
                return p;
            }
            let root = find(parent, &p);
            parent.insert(x.to_string(), root.clone());
            root
        }
        for group in groups {
            let tokens: Vec<String> = group.into_iter().map(|t| t.to_lowercase()).collect();
            for t in &tokens {
                parent.entry(t.clone()).or_insert_with(|| t.clone());
            }
            for pair in tokens.windows(2) {
                let (a, b) = (find(&mut parent, &pair[0]), find(&mut parent, &pair[1]));
                if a != b {
                    // Smaller string becomes the root so representatives are stable.
                    let (root, child) = if a < b { (a, b) } else { (b, a) };
                    parent.insert(child, root);
                }
            }
        }
        let keys: Vec<String> = parent.keys().cloned().collect();
        let canonical = keys.into_iter().map(|k| {
            let root = find(&mut parent, &k);
            (k, root)
        });
        SynonymLexicon { canonical: canonical.collect() }
    }

    pub fn has_entry(&self, token: &str) -> bool {
        self.canonical.contains_key(token)
    }

    pub fn canonical<'a>(&'a self, token: &'a str) -> &'a str {
        self.canonical.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_are_symmetric_and_transitive() {
        let lex = SynonymLexicon::parse(r#"{"paper": ["article"], "article": ["contribution"], "Author": ["writer"]}"#)
            .unwrap();
        assert_eq!(lex.canonical("paper"), lex.canonical("contribution"));
        assert_eq!(lex.canonical("writer"), lex.canonical("author"));
        assert_ne!(lex.canonical("paper"), lex.canonical("writer"));
        assert_eq!(lex.canonical("unknown"), "unknown");
        assert!(!lex.has_entry("unknown"));
    }
}
