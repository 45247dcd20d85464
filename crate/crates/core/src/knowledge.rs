//! Knowledge sources injected into every generation prompt.
//!
//! A knowledge directory holds a `manifest.json` naming three files:
//!
//! ```json
//! {"guidelines": "guidelines.md", "pitfalls": "pitfalls.md", "sample_script": "sample.txt"}
//! ```
//!
//! Documents are split into paragraph chunks, ranked against a query with
//! TF-IDF cosine similarity, and packed into a token budget.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::tfidf::{content_tokens, cosine, TfIdfModel};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("no {MANIFEST_FILE} in {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest {path}: {source}")]
    InvalidManifest {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("knowledge file not found: {0}")]
    MissingFile(PathBuf),
    #[error("knowledge file is empty: {0}")]
    EmptyFile(PathBuf),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("context budget {budget} is smaller than the instructions ({needed} tokens)")]
    BudgetTooSmall { budget: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KnowledgeKind {
    Guidelines,
    Pitfalls,
    SampleScript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KnowledgeDoc {
    pub id: String,
    pub kind: KnowledgeKind,
    pub text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    guidelines: PathBuf,
    pitfalls: PathBuf,
    sample_script: PathBuf,
}

pub fn load_knowledge(dir: &Path) -> Result<Vec<KnowledgeDoc>, KnowledgeError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(KnowledgeError::MissingManifest(dir.to_path_buf()));
    }
    let raw = fs::read_to_string(&manifest_path).map_err(|source| KnowledgeError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    let manifest: Manifest =
        serde_json::from_str(&raw).map_err(|source| KnowledgeError::InvalidManifest {
            path: manifest_path.clone(),
            source,
        })?;

    [
        (KnowledgeKind::Guidelines, manifest.guidelines),
        (KnowledgeKind::Pitfalls, manifest.pitfalls),
        (KnowledgeKind::SampleScript, manifest.sample_script),
    ]
    .into_iter()
    .map(|(kind, rel)| {
        let path = dir.join(&rel);
        if !path.is_file() {
            return Err(KnowledgeError::MissingFile(path));
        }
        let text = fs::read_to_string(&path).map_err(|source| KnowledgeError::Io {
            path: path.clone(),
            source,
        })?;
        if text.trim().is_empty() {
            return Err(KnowledgeError::EmptyFile(path));
        }
        let id = rel
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| rel.display().to_string());
        Ok(KnowledgeDoc { id, kind, text })
    })
    .collect()
}

/// Approximate token count as `ceil(words * num / den)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEstimator {
    pub num: u32,
    pub den: u32,
}

impl Default for TokenEstimator {
    fn default() -> Self {
        Self { num: 4, den: 3 }
    }
}

impl TokenEstimator {
    pub fn estimate(&self, text: &str) -> usize {
        let words = text.split_whitespace().count();
        let (num, den) = (self.num as usize, self.den.max(1) as usize);
        (words * num).div_ceil(den)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub doc_id: String,
    pub kind: KnowledgeKind,
    pub ordinal: usize,
    pub text: String,
    pub token_estimate: usize,
}

pub const MIN_CHUNK_TOKENS: usize = 32;
pub const PARAGRAPH_SEPARATOR: &str = "\n\n";

fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

/// Packs consecutive paragraphs into chunks of at most `target_tokens`.
/// A paragraph larger than the target becomes a chunk of its own. Targets
/// below [`MIN_CHUNK_TOKENS`] are raised to it.
pub fn chunk_doc(doc: &KnowledgeDoc, target_tokens: usize, est: &TokenEstimator) -> Vec<Chunk> {
    let target = target_tokens.max(MIN_CHUNK_TOKENS);
    let mut texts: Vec<String> = Vec::new();
    let mut current = String::new();
    for para in paragraphs(&doc.text) {
        if current.is_empty() {
            current = para;
            continue;
        }
        let merged = format!("{current}{PARAGRAPH_SEPARATOR}{para}");
        if est.estimate(&merged) > target {
            texts.push(std::mem::replace(&mut current, para));
        } else {
            current = merged;
        }
    }
    if !current.is_empty() {
        texts.push(current);
    }
    texts
        .into_iter()
        .enumerate()
        .map(|(ordinal, text)| Chunk {
            doc_id: doc.id.clone(),
            kind: doc.kind,
            ordinal,
            token_estimate: est.estimate(&text).max(1),
            text,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub score: f64,
}

/// Ranks `chunks` by TF-IDF cosine similarity to `query`, using the chunk
/// set as the corpus. Ties fall back to `(doc_id, ordinal)`.
pub fn retrieve(query: &str, chunks: &[Chunk], k: usize) -> Vec<ScoredChunk> {
    let docs: Vec<Vec<String>> = chunks.iter().map(|c| content_tokens(&c.text)).collect();
    let model = TfIdfModel::fit(&docs);
    let qvec = model.weigh(&content_tokens(query));
    let mut scored: Vec<ScoredChunk> = chunks
        .iter()
        .zip(&docs)
        .map(|(chunk, tokens)| ScoredChunk {
            chunk: chunk.clone(),
            score: cosine(&qvec, &model.weigh(tokens)),
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.chunk.doc_id.cmp(&b.chunk.doc_id))
            .then_with(|| a.chunk.ordinal.cmp(&b.chunk.ordinal))
    });
    scored.truncate(k.max(1));
    scored
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextBundle {
    pub system_instructions: String,
    pub chunks: Vec<ScoredChunk>,
    pub budget: usize,
    pub used: usize,
}

impl ContextBundle {
    /// System message text: instructions followed by the included knowledge.
    pub fn render(&self) -> String {
        let mut out = self.system_instructions.trim_end().to_string();
        if !self.chunks.is_empty() {
            out.push_str("\n\n# Reference knowledge\n");
            for sc in &self.chunks {
                out.push_str(&format!(
                    "\n[{} #{}]\n{}\n",
                    sc.chunk.doc_id, sc.chunk.ordinal, sc.chunk.text
                ));
            }
        }
        out
    }
}

/// Greedily packs ranked chunks after the instructions; stops at the first
/// chunk that does not fit so inclusion stays a prefix of the ranking.
pub fn assemble_context(
    instructions: &str,
    ranked: Vec<ScoredChunk>,
    budget: usize,
    est: &TokenEstimator,
) -> Result<ContextBundle, KnowledgeError> {
    let needed = est.estimate(instructions);
    if needed > budget {
        return Err(KnowledgeError::BudgetTooSmall { budget, needed });
    }
    let mut used = needed;
    let mut chunks = Vec::new();
    for sc in ranked {
        if used + sc.chunk.token_estimate > budget {
            break;
        }
        used += sc.chunk.token_estimate;
        chunks.push(sc);
    }
    Ok(ContextBundle {
        system_instructions: instructions.to_string(),
        chunks,
        budget,
        used,
    })
}

/// Loaded and chunked knowledge, immutable after construction.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    docs: Vec<KnowledgeDoc>,
    chunks: Vec<Chunk>,
    estimator: TokenEstimator,
}

impl KnowledgeBase {
    pub fn new(docs: Vec<KnowledgeDoc>, chunk_tokens: usize, estimator: TokenEstimator) -> Self {
        let chunks = docs
            .iter()
            .flat_map(|d| chunk_doc(d, chunk_tokens, &estimator))
            .collect();
        Self {
            docs,
            chunks,
            estimator,
        }
    }

    pub fn load(dir: &Path, chunk_tokens: usize, estimator: TokenEstimator) -> Result<Self, KnowledgeError> {
        Ok(Self::new(load_knowledge(dir)?, chunk_tokens, estimator))
    }

    pub fn docs(&self) -> &[KnowledgeDoc] {
        &self.docs
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn estimator(&self) -> &TokenEstimator {
        &self.estimator
    }

    /// Retrieves among chunks of the given kinds and packs them into `budget`.
    pub fn context(
        &self,
        instructions: &str,
        query: &str,
        kinds: &[KnowledgeKind],
        k: usize,
        budget: usize,
    ) -> Result<ContextBundle, KnowledgeError> {
        let pool: Vec<Chunk> = self
            .chunks
            .iter()
            .filter(|c| kinds.contains(&c.kind))
            .cloned()
            .collect();
        let ranked = retrieve(query, &pool, k);
        assemble_context(instructions, ranked, budget, &self.estimator)
    }
}
