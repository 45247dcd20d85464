//! Term weighting shared by key-term extraction and knowledge retrieval.
//!
//! * `tf(t, d) = count(t, d) / |d|` over kept tokens
//! * `idf(t) = ln((1 + N) / (1 + df(t))) + 1`
//!
//! Kept tokens are the output of [`tokenize_words`] minus stopwords and
//! pure-number tokens.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use crate::transcript::tokenize_words;

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_EN
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    if token.contains('\u{2019}') {
        return stopwords().contains(token.replace('\u{2019}', "'").as_str());
    }
    stopwords().contains(token)
}

fn is_number(token: &str) -> bool {
    token
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '%'))
}

/// Tokens that carry topical weight.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize_words(text)
        .into_iter()
        .filter(|t| !is_stopword(t) && !is_number(t))
        .collect()
}

/// Relative term frequencies of one document.
pub fn term_frequencies(tokens: &[String]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.clone()).or_insert(0) += 1;
    }
    let total = tokens.len() as f64;
    counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 / total))
        .collect()
}

/// Document frequencies over a fixed corpus.
#[derive(Debug, Clone)]
pub struct TfIdfModel {
    n_docs: usize,
    df: BTreeMap<String, usize>,
}

impl TfIdfModel {
    pub fn fit<D: AsRef<[String]>>(docs: &[D]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&String> = doc.as_ref().iter().collect();
            for t in unique {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Self {
            n_docs: docs.len(),
            df,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df(term) as f64)).ln() + 1.0
    }

    /// Sparse TF-IDF vector for a token list.
    pub fn weigh(&self, tokens: &[String]) -> BTreeMap<String, f64> {
        term_frequencies(tokens)
            .into_iter()
            .map(|(t, tf)| {
                let w = tf * self.idf(&t);
                (t, w)
            })
            .collect()
    }
}

pub fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, w)| large.get(t).map(|v| w * v))
        .sum();
    let norm = |v: &BTreeMap<String, f64>| v.values().map(|w| w * w).sum::<f64>().sqrt();
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        (dot / denom).clamp(0.0, 1.0)
    }
}
