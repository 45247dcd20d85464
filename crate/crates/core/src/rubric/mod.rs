//! Expert-evaluation records and their aggregation.
//!
//! An evaluation document scores one script on three natural-language
//! dimensions and six interview-rubric elements, each on a 1–5 scale:
//!
//! ```json
//! {
//!   "script_id": "S1",
//!   "evaluator_id": "expert-1",
//!   "natural_language": {"naturalness": {"score": 4, "notes": ""}, ...},
//!   "rubric": {"greeting": {"score": 2, "notes": "no role identified"}, ...}
//! }
//! ```

mod lint;

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::transcript::Script;

pub use lint::{
    lint_script, FindingTag, LintFinding, LintPatterns, LintRule, MistakeTag, Severity,
    StructuralCheck,
};

pub const MIN_SCORE: i64 = 1;
pub const MAX_SCORE: i64 = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RubricError {
    #[error("malformed evaluation document: {0}")]
    Malformed(String),
    #[error("evaluator_id is empty")]
    MissingEvaluator,
    #[error("script_id is empty")]
    MissingScriptId,
    #[error("missing score for `{0}`")]
    MissingScore(String),
    #[error("score for `{key}` is {value}; expected an integer from 1 to 5")]
    OutOfRange { key: String, value: String },
    #[error("duplicate entry `{0}`")]
    DuplicateEntry(String),
    #[error("unknown entry `{0}`")]
    UnknownEntry(String),
    #[error("no evaluation records")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlDimension {
    Naturalness,
    Coherence,
    Completeness,
}

impl NlDimension {
    pub const ALL: [NlDimension; 3] = [Self::Naturalness, Self::Coherence, Self::Completeness];

    pub fn key(self) -> &'static str {
        match self {
            Self::Naturalness => "naturalness",
            Self::Coherence => "coherence",
            Self::Completeness => "completeness",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Naturalness => "Naturalness",
            Self::Coherence => "Coherence",
            Self::Completeness => "Completeness",
        }
    }

    /// Anchors of the 1 and 5 ends of the scale.
    pub fn scale(self) -> (&'static str, &'static str) {
        match self {
            Self::Naturalness => ("not natural at all", "quite natural"),
            Self::Coherence => ("not coherent at all", "quite coherent"),
            Self::Completeness => ("not complete at all", "quite complete"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RubricElement {
    Greeting,
    Opening,
    AnalyzeAsIs,
    DesignToBe,
    Closing,
    ActiveListening,
}

impl RubricElement {
    pub const ALL: [RubricElement; 6] = [
        Self::Greeting,
        Self::Opening,
        Self::AnalyzeAsIs,
        Self::DesignToBe,
        Self::Closing,
        Self::ActiveListening,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Self::Greeting => "greeting",
            Self::Opening => "opening",
            Self::AnalyzeAsIs => "analyze_as_is",
            Self::DesignToBe => "design_to_be",
            Self::Closing => "closing",
            Self::ActiveListening => "active_listening",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Greeting => "Greeting",
            Self::Opening => "Opening",
            Self::AnalyzeAsIs => "Analyze Current State \"As Is\"",
            Self::DesignToBe => "Design \"To Be\" System",
            Self::Closing => "Closing",
            Self::ActiveListening => "Active Listening",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryDoc {
    #[serde(default)]
    pub score: serde_json::Value,
    #[serde(default)]
    pub notes: String,
}

impl EntryDoc {
    fn blank() -> Self {
        Self {
            score: serde_json::Value::Null,
            notes: String::new(),
        }
    }
}

/// Section of an evaluation document. Keeps every `(key, entry)` pair in
/// document order, duplicates included, so validation can report them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section(pub Vec<(String, EntryDoc)>);

impl Serialize for Section {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.iter().map(|(k, v)| (k, v)))
    }
}

impl<'de> Deserialize<'de> for Section {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SectionVisitor;

        impl<'de> Visitor<'de> for SectionVisitor {
            type Value = Section;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of score entries")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Section, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, EntryDoc>()? {
                    entries.push((k, v));
                }
                Ok(Section(entries))
            }
        }

        deserializer.deserialize_map(SectionVisitor)
    }
}

/// Evaluation document as stored on disk: a template or a filled record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDoc {
    pub script_id: String,
    #[serde(default)]
    pub evaluator_id: String,
    #[serde(default)]
    pub natural_language: Section,
    #[serde(default)]
    pub rubric: Section,
}

impl EvaluationDoc {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(raw: &str) -> Result<Self, RubricError> {
        serde_json::from_str(raw).map_err(|e| RubricError::Malformed(e.to_string()))
    }

    pub fn score_slots(&self) -> usize {
        self.natural_language.0.len() + self.rubric.0.len()
    }
}

/// Blank document listing all nine score slots for `script`.
pub fn new_evaluation_template(script: &Script, evaluator_id: &str) -> EvaluationDoc {
    EvaluationDoc {
        script_id: script.id().to_string(),
        evaluator_id: evaluator_id.to_string(),
        natural_language: Section(
            NlDimension::ALL
                .iter()
                .map(|d| (d.key().to_string(), EntryDoc::blank()))
                .collect(),
        ),
        rubric: Section(
            RubricElement::ALL
                .iter()
                .map(|e| (e.key().to_string(), EntryDoc::blank()))
                .collect(),
        ),
    }
}

/// `<script>__<evaluator>.json`, one file per pair.
pub fn record_file_name(script_id: &str, evaluator_id: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
            .collect()
    };
    format!("{}__{}.json", clean(script_id), clean(evaluator_id))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvaluationRecord {
    pub script_id: String,
    pub evaluator_id: String,
    pub nl_scores: BTreeMap<NlDimension, u8>,
    pub rubric_scores: BTreeMap<RubricElement, u8>,
    pub notes: BTreeMap<String, String>,
}

impl EvaluationRecord {
    pub fn to_document(&self) -> EvaluationDoc {
        let entry = |key: &str, score: u8| {
            (
                key.to_string(),
                EntryDoc {
                    score: serde_json::Value::from(score),
                    notes: self.notes.get(key).cloned().unwrap_or_default(),
                },
            )
        };
        EvaluationDoc {
            script_id: self.script_id.clone(),
            evaluator_id: self.evaluator_id.clone(),
            natural_language: Section(
                self.nl_scores.iter().map(|(d, s)| entry(d.key(), *s)).collect(),
            ),
            rubric: Section(
                self.rubric_scores.iter().map(|(e, s)| entry(e.key(), *s)).collect(),
            ),
        }
    }
}

fn check_score(key: &str, value: &serde_json::Value, errors: &mut Vec<RubricError>) -> Option<u8> {
    match value {
        serde_json::Value::Null => {
            errors.push(RubricError::MissingScore(key.to_string()));
            None
        }
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(v) if (MIN_SCORE..=MAX_SCORE).contains(&v) => Some(v as u8),
            _ => {
                errors.push(RubricError::OutOfRange {
                    key: key.to_string(),
                    value: n.to_string(),
                });
                None
            }
        },
        other => {
            errors.push(RubricError::OutOfRange {
                key: key.to_string(),
                value: other.to_string(),
            });
            None
        }
    }
}

fn validate_section<K: Ord + Copy>(
    section: &Section,
    all: &[K],
    key_of: impl Fn(K) -> &'static str,
    notes: &mut BTreeMap<String, String>,
    errors: &mut Vec<RubricError>,
) -> BTreeMap<K, u8> {
    let mut scores = BTreeMap::new();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (key, entry) in &section.0 {
        *seen.entry(key.as_str()).or_insert(0) += 1;
        let Some(k) = all.iter().copied().find(|k| key_of(*k) == key) else {
            errors.push(RubricError::UnknownEntry(key.clone()));
            continue;
        };
        if seen[key.as_str()] > 1 {
            if seen[key.as_str()] == 2 {
                errors.push(RubricError::DuplicateEntry(key.clone()));
            }
            continue;
        }
        if let Some(score) = check_score(key, &entry.score, errors) {
            scores.insert(k, score);
        }
        if !entry.notes.trim().is_empty() {
            notes.insert(key.clone(), entry.notes.clone());
        }
    }
    for k in all {
        if !seen.contains_key(key_of(*k)) {
            errors.push(RubricError::MissingScore(key_of(*k).to_string()));
        }
    }
    scores
}

pub fn validate_document(doc: &EvaluationDoc) -> Result<EvaluationRecord, Vec<RubricError>> {
    let mut errors = Vec::new();
    if doc.script_id.trim().is_empty() {
        errors.push(RubricError::MissingScriptId);
    }
    if doc.evaluator_id.trim().is_empty() {
        errors.push(RubricError::MissingEvaluator);
    }
    let mut notes = BTreeMap::new();
    let nl_scores = validate_section(
        &doc.natural_language,
        &NlDimension::ALL,
        NlDimension::key,
        &mut notes,
        &mut errors,
    );
    let rubric_scores = validate_section(
        &doc.rubric,
        &RubricElement::ALL,
        RubricElement::key,
        &mut notes,
        &mut errors,
    );
    if errors.is_empty() {
        Ok(EvaluationRecord {
            script_id: doc.script_id.clone(),
            evaluator_id: doc.evaluator_id.clone(),
            nl_scores,
            rubric_scores,
            notes,
        })
    } else {
        Err(errors)
    }
}

pub fn validate_evaluation(raw: &str) -> Result<EvaluationRecord, Vec<RubricError>> {
    let doc = EvaluationDoc::from_json(raw).map_err(|e| vec![e])?;
    validate_document(&doc)
}

/// Mean score of one (row, script) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub mean: f64,
    pub evaluators: usize,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.evaluators == 1 {
            write!(f, "{}", self.mean)
        } else {
            write!(f, "{:.1}", self.mean)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub key: String,
    pub label: String,
    pub cells: Vec<Cell>,
}

/// Per-script columns (in first-appearance order) for the natural-language
/// table and the rubric table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RubricTables {
    pub scripts: Vec<String>,
    pub natural_language: Vec<TableRow>,
    pub rubric: Vec<TableRow>,
}

pub fn aggregate(records: &[EvaluationRecord]) -> Result<RubricTables, RubricError> {
    if records.is_empty() {
        return Err(RubricError::EmptyInput);
    }
    let mut scripts: Vec<String> = Vec::new();
    let mut by_script: BTreeMap<&str, Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in records {
        if !scripts.contains(&r.script_id) {
            scripts.push(r.script_id.clone());
        }
        let group = by_script.entry(r.script_id.as_str()).or_default();
        if group.iter().any(|o| o.evaluator_id == r.evaluator_id) {
            return Err(RubricError::DuplicateEntry(format!(
                "{}/{}",
                r.script_id, r.evaluator_id
            )));
        }
        group.push(r);
    }

    let cell = |script: &str, get: &dyn Fn(&EvaluationRecord) -> u8| {
        let group = &by_script[script];
        let sum: u32 = group.iter().map(|r| u32::from(get(r))).sum();
        Cell {
            mean: f64::from(sum) / group.len() as f64,
            evaluators: group.len(),
        }
    };

    let natural_language = NlDimension::ALL
        .iter()
        .map(|d| TableRow {
            key: d.key().into(),
            label: d.label().into(),
            cells: scripts
                .iter()
                .map(|s| cell(s, &|r: &EvaluationRecord| r.nl_scores[d]))
                .collect(),
        })
        .collect();
    let rubric = RubricElement::ALL
        .iter()
        .map(|e| TableRow {
            key: e.key().into(),
            label: e.label().into(),
            cells: scripts
                .iter()
                .map(|s| cell(s, &|r: &EvaluationRecord| r.rubric_scores[e]))
                .collect(),
        })
        .collect();
    Ok(RubricTables {
        scripts,
        natural_language,
        rubric,
    })
}

fn render_table(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            std::iter::once(&header)
                .chain(rows.iter())
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let fmt_row = |r: &[String]| {
        r.iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = fmt_row(&header);
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in &rows {
        out.push_str(&fmt_row(r));
        out.push('\n');
    }
    out
}

impl RubricTables {
    /// Natural-language dimensions with their scale anchors.
    pub fn render_natural_language(&self) -> String {
        let mut header = vec!["Dimension".to_string(), "1 ...".into(), "... 5".into()];
        header.extend(self.scripts.iter().cloned());
        let rows = self
            .natural_language
            .iter()
            .zip(NlDimension::ALL)
            .map(|(row, d)| {
                let (lo, hi) = d.scale();
                let mut r = vec![row.label.clone(), lo.to_string(), hi.to_string()];
                r.extend(row.cells.iter().map(Cell::to_string));
                r
            })
            .collect();
        render_table(header, rows)
    }

    pub fn render_rubric(&self) -> String {
        let mut header = vec!["Rubric".to_string()];
        header.extend(self.scripts.iter().cloned());
        let rows = self
            .rubric
            .iter()
            .map(|row| {
                let mut r = vec![row.label.clone()];
                r.extend(row.cells.iter().map(Cell::to_string));
                r
            })
            .collect();
        render_table(header, rows)
    }
}
