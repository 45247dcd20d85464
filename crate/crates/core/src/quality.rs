//! Reference-free per-turn quality scores.
//!
//! Four lexical sub-metrics, each in `[0, 1]`, stand in for the neural
//! grammaticality / non-redundancy / focus / coherence criteria:
//!
//! * **grammaticality**: a pluggable [`GrammarScorer`]; the bundled
//!   `heuristic` scorer subtracts fixed penalties from 1.0.
//! * **non-redundancy**: `1 - repeated word-trigram fraction`.
//! * **focus**: mean similarity of adjacent sentences.
//! * **coherence**: mean similarity of adjacent units of a sequence (the
//!   sentences of a turn, or the turns of a script).
//!
//! Similarity between two texts is the cosine of their token sets, where a
//! token is a non-stopword word reduced by [`light_stem`], mapped through
//! `min(1, s / 0.2)`. Degenerate inputs (empty, one sentence) score 1.0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::tfidf::is_stopword;
use crate::transcript::{split_sentences, tokenize_words, Script, Speaker, Turn};

/// Similarity at which overlap saturates to 1.0.
pub const SATURATION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QualityError {
    #[error("no grammaticality scorer registered under `{0}`")]
    NoScorerRegistered(String),
    #[error("script has no turns")]
    EmptyScript,
}

pub fn non_redundancy(text: &str) -> f64 {
    let words = tokenize_words(text);
    if words.len() < 3 {
        return 1.0;
    }
    let mut seen = BTreeSet::new();
    let mut repeats = 0usize;
    let total = words.len() - 2;
    for w in words.windows(3) {
        if !seen.insert(w) {
            repeats += 1;
        }
    }
    1.0 - repeats as f64 / total.max(1) as f64
}

/// Strips one common English suffix so that inflections share a token
/// ("scheduling" and "scheduler" both become "schedul").
pub fn light_stem(token: &str) -> String {
    const SUFFIXES: [&str; 9] = ["ing", "ers", "ies", "er", "ed", "es", "ly", "s", "'s"];
    for suf in SUFFIXES {
        if let Some(stem) = token.strip_suffix(suf) {
            if stem.chars().count() >= 3 && !stem.ends_with('\'') {
                return stem.to_string();
            }
        }
    }
    token.to_string()
}

fn token_set(text: &str) -> BTreeSet<String> {
    tokenize_words(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .map(|t| light_stem(&t))
        .collect()
}

/// Cosine of binary token-set vectors: `|A ∩ B| / sqrt(|A| |B|)`.
/// Two empty sets are identical (1.0); one empty set shares nothing (0.0).
pub fn set_cosine(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let shared = a.intersection(b).count();
            shared as f64 / ((a.len() * b.len()) as f64).sqrt()
        }
    }
}

fn saturate(s: f64) -> f64 {
    (s / SATURATION).min(1.0)
}

/// Mean saturated similarity over adjacent pairs. Pair values are summed in
/// sorted order so that reversing the sequence gives a bit-identical mean.
fn adjacent_similarity<S: AsRef<str>>(units: &[S]) -> f64 {
    if units.len() <= 1 {
        return 1.0;
    }
    let sets: Vec<BTreeSet<String>> = units.iter().map(|u| token_set(u.as_ref())).collect();
    let mut sims: Vec<f64> = sets
        .windows(2)
        .map(|w| saturate(set_cosine(&w[0], &w[1])))
        .collect();
    sims.sort_by(f64::total_cmp);
    let n = sims.len() as f64;
    sims.into_iter().sum::<f64>() / n
}

pub fn focus(text: &str) -> f64 {
    adjacent_similarity(&split_sentences(text))
}

pub fn coherence<S: AsRef<str>>(units: &[S]) -> f64 {
    adjacent_similarity(units)
}

pub trait GrammarScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, text: &str) -> f64;
}

/// Penalty table, in tenths:
///
/// | defect                                          | penalty |
/// |-------------------------------------------------|---------|
/// | multi-word text without terminal `.` `!` `?` `…` | 0.1     |
/// | each unbalanced bracket pair or quote kind       | 0.2     |
/// | each immediately repeated word ("the the")       | 0.1     |
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicGrammar;

impl HeuristicGrammar {
    fn penalty_tenths(text: &str) -> u32 {
        let mut tenths = 0;
        let words = tokenize_words(text);

        let tail = text
            .trim_end()
            .trim_end_matches(['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}']);
        if words.len() > 1 && !tail.ends_with(['.', '!', '?', '\u{2026}']) {
            tenths += 1;
        }

        for (open, close) in [('(', ')'), ('[', ']'), ('{', '}'), ('\u{201c}', '\u{201d}')] {
            let mut depth: i64 = 0;
            let mut broken = false;
            for c in text.chars() {
                if c == open {
                    depth += 1;
                } else if c == close {
                    depth -= 1;
                    broken |= depth < 0;
                }
            }
            if broken || depth != 0 {
                tenths += 2;
            }
        }
        if text.chars().filter(|&c| c == '"').count() % 2 == 1 {
            tenths += 2;
        }

        tenths += words.windows(2).filter(|w| w[0] == w[1]).count() as u32;
        tenths
    }
}

impl GrammarScorer for HeuristicGrammar {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn score(&self, text: &str) -> f64 {
        let tenths = Self::penalty_tenths(text).min(10);
        f64::from(10 - tenths) / 10.0
    }
}

pub struct ScorerRegistry {
    scorers: BTreeMap<String, Box<dyn GrammarScorer>>,
}

impl Default for ScorerRegistry {
    fn default() -> Self {
        let mut r = Self {
            scorers: BTreeMap::new(),
        };
        r.register(Box::new(HeuristicGrammar));
        r
    }
}

impl fmt::Debug for ScorerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.scorers.keys()).finish()
    }
}

impl ScorerRegistry {
    pub fn empty() -> Self {
        Self {
            scorers: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, scorer: Box<dyn GrammarScorer>) {
        self.scorers.insert(scorer.name().to_string(), scorer);
    }

    pub fn get(&self, name: &str) -> Result<&dyn GrammarScorer, QualityError> {
        self.scorers
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| QualityError::NoScorerRegistered(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.scorers.keys().map(String::as_str)
    }
}

pub fn grammaticality(text: &str, scorer: &dyn GrammarScorer) -> f64 {
    scorer.score(text).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricWeights {
    pub grammaticality: f64,
    pub non_redundancy: f64,
    pub focus: f64,
    pub coherence: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            grammaticality: 1.0,
            non_redundancy: 1.0,
            focus: 1.0,
            coherence: 1.0,
        }
    }
}

impl MetricWeights {
    pub fn is_valid(&self) -> bool {
        let w = [self.grammaticality, self.non_redundancy, self.focus, self.coherence];
        w.iter().all(|x| x.is_finite() && *x >= 0.0) && w.iter().sum::<f64>() > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityScore {
    pub grammaticality: f64,
    pub non_redundancy: f64,
    pub focus: f64,
    pub coherence: f64,
    pub composite: f64,
}

impl QualityScore {
    pub fn new(g: f64, n: f64, f: f64, c: f64, weights: &MetricWeights) -> Self {
        let composite = if *weights == MetricWeights::default() {
            (g + n + f + c) / 4.0
        } else {
            let total = weights.grammaticality + weights.non_redundancy + weights.focus + weights.coherence;
            (weights.grammaticality * g + weights.non_redundancy * n + weights.focus * f + weights.coherence * c)
                / total
        };
        Self {
            grammaticality: g,
            non_redundancy: n,
            focus: f,
            coherence: c,
            composite: composite.clamp(0.0, 1.0),
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.grammaticality, self.non_redundancy, self.focus, self.coherence]
    }
}

/// Per-turn scorer bound to a grammaticality scorer and composite weights.
pub struct QualityScorer<'a> {
    grammar: &'a dyn GrammarScorer,
    weights: MetricWeights,
}

impl<'a> QualityScorer<'a> {
    pub fn new(grammar: &'a dyn GrammarScorer, weights: MetricWeights) -> Self {
        Self { grammar, weights }
    }

    pub fn score_text(&self, text: &str) -> QualityScore {
        QualityScore::new(
            grammaticality(text, self.grammar),
            non_redundancy(text),
            focus(text),
            coherence(&split_sentences(text)),
            &self.weights,
        )
    }

    pub fn score_turn(&self, turn: &Turn) -> QualityScore {
        self.score_text(&turn.text)
    }

    pub fn score_script(&self, script: &Script) -> Result<QualityReport, QualityError> {
        if script.is_empty() {
            return Err(QualityError::EmptyScript);
        }
        let turns: Vec<TurnQuality> = script
            .turns()
            .iter()
            .map(|t| TurnQuality {
                index: t.index,
                speaker: t.speaker,
                score: self.score_turn(t),
            })
            .collect();
        let texts: Vec<&str> = script.turns().iter().map(|t| t.text.as_str()).collect();
        Ok(QualityReport::from_turns(
            script.id().to_string(),
            turns,
            coherence(&texts),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} \u{00b1} {:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnQuality {
    pub index: usize,
    pub speaker: Speaker,
    pub score: QualityScore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub script_id: String,
    pub turns: Vec<TurnQuality>,
    pub interviewer: Option<MeanStd>,
    pub stakeholder: Option<MeanStd>,
    pub all: MeanStd,
    /// Adjacent-turn coherence over the whole script.
    pub script_coherence: f64,
}

impl QualityReport {
    pub fn from_turns(script_id: String, turns: Vec<TurnQuality>, script_coherence: f64) -> Self {
        let composites = |who: Option<Speaker>| -> Vec<f64> {
            turns
                .iter()
                .filter(|t| who.map_or(true, |s| t.speaker == s))
                .map(|t| t.score.composite)
                .collect()
        };
        let interviewer = MeanStd::of(&composites(Some(Speaker::Interviewer)));
        let stakeholder = MeanStd::of(&composites(Some(Speaker::Stakeholder)));
        let all = MeanStd::of(&composites(None)).unwrap_or(MeanStd {
            mean: 0.0,
            std: 0.0,
            n: 0,
        });
        Self {
            script_id,
            turns,
            interviewer,
            stakeholder,
            all,
            script_coherence,
        }
    }
}

/// Table with one row per script and mean ± std cells for interviewer,
/// stakeholder and all turns.
pub fn render_quality_table(reports: &[QualityReport]) -> String {
    let cell = |m: &Option<MeanStd>| m.map_or_else(|| "-".to_string(), |m| m.to_string());
    let header = [
        "Script".to_string(),
        "Interviewer Turns (mean \u{00b1} std)".to_string(),
        "Stakeholder Turns (mean \u{00b1} std)".to_string(),
        "All Turns (mean \u{00b1} std)".to_string(),
    ];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.script_id.clone(),
                cell(&r.interviewer),
                cell(&r.stakeholder),
                r.all.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..4)
        .map(|c| {
            std::iter::once(&header)
                .chain(rows.iter())
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let fmt_row = |r: &[String; 4]| {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            line.push_str(cell);
            if c < 3 {
                line.push_str(&" ".repeat(pad + 2));
            }
        }
        line.trim_end().to_string()
    };
    let mut out = fmt_row(&header);
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in &rows {
        out.push_str(&fmt_row(r));
        out.push('\n');
    }
    out.push_str("std: population standard deviation of per-turn composite scores\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{parse_script, ScriptFormat};

    fn scorer() -> QualityScorer<'static> {
        static G: HeuristicGrammar = HeuristicGrammar;
        QualityScorer::new(&G, MetricWeights::default())
    }

    #[test]
    fn non_redundancy_examples() {
        assert_eq!(non_redundancy("the cat sat"), 1.0);
        assert_eq!(non_redundancy("a b c a b c"), 0.75);
        assert_eq!(non_redundancy(""), 1.0);
        assert_eq!(non_redundancy("two words"), 1.0);
    }

    #[test]
    fn light_stem_merges_inflections() {
        assert_eq!(light_stem("scheduling"), "schedul");
        assert_eq!(light_stem("scheduler"), "schedul");
        assert_eq!(light_stem("is"), "is");
        assert_eq!(light_stem("calendars"), "calendar");
    }

    #[test]
    fn focus_examples() {
        assert_eq!(focus("Just one sentence here."), 1.0);
        assert_eq!(focus("We track meals. We track meals."), 1.0);
        let related = focus("We need scheduling. The scheduler must sync calendars.");
        let unrelated = focus("We need scheduling. Bananas grow in tropical climates.");
        assert!(related > unrelated, "{related} vs {unrelated}");
        assert_eq!(unrelated, 0.0);
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(coherence::<&str>(&[]), 1.0);
        assert_eq!(coherence(&["same words here", "same words here", "same words here"]), 1.0);
    }

    #[test]
    fn grammar_examples() {
        let g = HeuristicGrammar;
        assert_eq!(grammaticality("What features do you need?", &g), 1.0);
        assert_eq!(grammaticality("the the system works", &g), 0.8);
        assert!(grammaticality("(unclosed bracket", &g) <= 0.8);
        assert_eq!(grammaticality("He said \"hi.", &g), 0.8);
        assert_eq!(grammaticality("Ok", &g), 1.0);
        assert_eq!(grammaticality("((((( [[[[ {{{{ \"", &g), 0.2);
        assert_eq!(grammaticality("no no no no no no no no no no no no", &g), 0.0);
    }

    #[test]
    fn registry_lookup() {
        let reg = ScorerRegistry::default();
        assert!(reg.get("heuristic").is_ok());
        assert_eq!(
            reg.get("cola").err(),
            Some(QualityError::NoScorerRegistered("cola".into()))
        );
        assert!(ScorerRegistry::empty().get("heuristic").is_err());
    }

    #[test]
    fn clean_turn_is_perfect() {
        let s = scorer().score_text("What features do you need?");
        assert_eq!(s.components(), [1.0; 4]);
        assert_eq!(s.composite, 1.0);
    }

    #[test]
    fn duplicated_sentence_lowers_non_redundancy_only() {
        let once = scorer().score_text("The portal tracks referee budgets.");
        let twice =
            scorer().score_text("The portal tracks referee budgets. The portal tracks referee budgets.");
        assert!(twice.non_redundancy < once.non_redundancy);
        assert_eq!(twice.focus, 1.0);
    }

    #[test]
    fn script_aggregates_population_std() {
        let s = parse_script(
            "Interviewer: Hello there\nInterviewer: What features do you need?\nStakeholder: Fine.",
            ScriptFormat::Plain,
        )
        .unwrap();
        let r = scorer().score_script(&s).unwrap();
        // 0.9 (missing terminal punctuation) and 1.0
        let i = r.interviewer.unwrap();
        assert!((r.turns[0].score.grammaticality - 0.9).abs() < 1e-15);
        assert!((i.mean - (0.975 + 1.0) / 2.0).abs() < 1e-12);
        assert!((i.std - 0.0125).abs() < 1e-12);
        assert_eq!(r.stakeholder.unwrap().std, 0.0);
        assert_eq!(r.all.n, 3);
    }

    #[test]
    fn mean_std_hand_values() {
        let m = MeanStd::of(&[0.6, 1.0]).unwrap();
        assert!((m.mean - 0.8).abs() < 1e-12);
        assert!((m.std - 0.2).abs() < 1e-12);
        assert_eq!(MeanStd::of(&[]), None);
    }

    #[test]
    fn weighted_composite() {
        let w = MetricWeights {
            grammaticality: 3.0,
            non_redundancy: 1.0,
            focus: 0.0,
            coherence: 0.0,
        };
        let s = QualityScore::new(0.5, 1.0, 0.0, 0.0, &w);
        assert!((s.composite - 0.625).abs() < 1e-15);
    }

    #[test]
    fn table_layout() {
        let s = parse_script("Interviewer: Hi?\nStakeholder: Yes.", ScriptFormat::Plain)
            .unwrap()
            .with_id("S1");
        let r = scorer().score_script(&s).unwrap();
        let t = render_quality_table(&[r]);
        assert!(t.contains("Interviewer Turns (mean \u{00b1} std)"));
        assert!(t.lines().nth(2).unwrap().starts_with("S1"));
        assert!(t.contains("1.00 \u{00b1} 0.00"));
        assert!(t.contains("population"));
    }
}
