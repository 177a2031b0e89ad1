//! Deterministic 4-component label embeddings.
//!
//! Words in the same semantic group sit around a shared center, so related
//! labels (ingredient names, sticker names) come out close together.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const EMBEDDING_DIM: usize = 4;

/// Semantic groups of the built-in vocabulary.
pub const VOCABULARY: [(&str, &[&str]); 5] = [
    ("stickers", &["heart", "star", "smile", "sun", "flower", "cat"]),
    ("actions", &["undo", "upload", "save", "cancel", "recipe"]),
    ("categories", &["text", "emoji", "filter", "grains", "fruits", "veg"]),
    ("ingredients", &["apple", "pear", "rice", "wheat", "carrot", "pepper"]),
    ("surfaces", &["photo", "target", "slider", "like", "dislike"]),
];

/// Seed of the table every component uses by default.
pub const STANDARD_SEED: u64 = 0x1ab_e15;
/// Spread of words around their group center.
const WORD_SPREAD: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub seed: u64,
    pub words: BTreeMap<String, [f64; EMBEDDING_DIM]>,
}

fn normalize(v: [f64; EMBEDDING_DIM]) -> [f64; EMBEDDING_DIM] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Well-separated group centers: the four axes plus their negated diagonal.
fn group_center(g: usize) -> [f64; EMBEDDING_DIM] {
    let mut c = [0.0; EMBEDDING_DIM];
    if g < EMBEDDING_DIM {
        c[g] = 1.0;
    } else {
        c = [-0.5; EMBEDDING_DIM];
    }
    c
}

impl EmbeddingTable {
    pub fn generate(seed: u64) -> Self {
        let mut words = BTreeMap::new();
        for (g, (group, members)) in VOCABULARY.iter().enumerate() {
            let center = group_center(g);
            for (i, w) in members.iter().enumerate() {
                let mut rng = seed::rng(seed, group, i as u64);
                let mut v = center;
                for x in v.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *x += WORD_SPREAD * n;
                }
                words.insert((*w).to_string(), normalize(v));
            }
        }
        Self { seed, words }
    }

    pub fn standard() -> &'static EmbeddingTable {
        static TABLE: OnceLock<EmbeddingTable> = OnceLock::new();
        TABLE.get_or_init(|| EmbeddingTable::generate(STANDARD_SEED))
    }

    pub fn get(&self, word: &str) -> Result<[f64; EMBEDDING_DIM]> {
        self.words.get(word).copied().ok_or_else(|| Error::UnknownLabel(word.to_string()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }

    /// Longest word, in characters; salience is normalized against it.
    pub fn max_word_len(&self) -> usize {
        self.words.keys().map(|w| w.chars().count()).max().unwrap_or(1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Embedding of `word` in the standard table.
pub fn embed_label(word: &str) -> Result<[f64; EMBEDDING_DIM]> {
    EmbeddingTable::standard().get(word)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: [f64; 4], b: [f64; 4]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn repeated_lookup_is_identical() {
        assert_eq!(embed_label("undo").unwrap(), embed_label("undo").unwrap());
        assert_eq!(EmbeddingTable::generate(3), EmbeddingTable::generate(3));
    }

    #[test]
    fn all_vectors_are_unit() {
        for v in EmbeddingTable::standard().words.values() {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn related_words_are_closer() {
        let t = EmbeddingTable::standard();
        let apple = t.get("apple").unwrap();
        assert!(cos(apple, t.get("pear").unwrap()) > cos(apple, t.get("undo").unwrap()));
        assert!(cos(t.get("heart").unwrap(), t.get("star").unwrap()) > cos(t.get("heart").unwrap(), t.get("rice").unwrap()));
    }

    #[test]
    fn unknown_word_errors() {
        assert!(matches!(embed_label("zebra"), Err(Error::UnknownLabel(w)) if w == "zebra"));
    }

    #[test]
    fn json_round_trip() {
        let t = EmbeddingTable::generate(9);
        assert_eq!(EmbeddingTable::from_json(&t.to_json()).unwrap(), t);
    }
}
