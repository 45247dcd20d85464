//! Dialogue characteristics of interview scripts: turn-length distributions,
//! dialogue-act counts and top TF-IDF terms per script.

mod stats;
pub mod tfidf;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::transcript::{classify_turn, DialogueAct, Script, Speaker};

pub use stats::{turn_length_stats, TurnLengthStats};
use tfidf::{content_tokens, TfIdfModel};

/// Turns shorter than this many words count as brief.
pub const SHORT_TURN_WORDS: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("empty input")]
    EmptyInput,
    #[error("script `{0}` is not in the corpus")]
    UnknownScript(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ActCounts {
    pub nq: usize,
    pub q: usize,
}

impl ActCounts {
    pub fn total(&self) -> usize {
        self.nq + self.q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerStats {
    pub speaker: Speaker,
    pub turns: usize,
    /// `None` when the speaker has no turns.
    pub lengths: Option<TurnLengthStats>,
    pub acts: ActCounts,
    pub mean_length: Option<f64>,
    pub short_turns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermScore {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptReport {
    pub script_id: String,
    pub total_turns: usize,
    /// Interviewer turns immediately answered by a stakeholder turn.
    pub exchange_pairs: usize,
    pub interviewer: SpeakerStats,
    pub stakeholder: SpeakerStats,
    pub top_terms: Vec<TermScore>,
}

impl ScriptReport {
    pub fn speaker(&self, speaker: Speaker) -> &SpeakerStats {
        match speaker {
            Speaker::Interviewer => &self.interviewer,
            Speaker::Stakeholder => &self.stakeholder,
        }
    }
}

pub fn act_counts(script: &Script, speaker: Speaker) -> ActCounts {
    script
        .turns_by(speaker)
        .fold(ActCounts::default(), |mut acc, t| {
            match classify_turn(t) {
                DialogueAct::Question => acc.q += 1,
                DialogueAct::NonQuestion => acc.nq += 1,
            }
            acc
        })
}

pub fn speaker_stats(script: &Script, speaker: Speaker) -> SpeakerStats {
    let lengths: Vec<u32> = script
        .turns_by(speaker)
        .map(|t| t.word_count() as u32)
        .collect();
    let mean_length = (!lengths.is_empty())
        .then(|| lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / lengths.len() as f64);
    SpeakerStats {
        speaker,
        turns: lengths.len(),
        lengths: turn_length_stats(&lengths).ok(),
        acts: act_counts(script, speaker),
        mean_length,
        short_turns: lengths.iter().filter(|&&l| l < SHORT_TURN_WORDS).count(),
    }
}

fn script_tokens(script: &Script) -> Vec<String> {
    script
        .turns()
        .iter()
        .flat_map(|t| content_tokens(&t.text))
        .collect()
}

/// Top `k` terms of the target script, each script of `corpus` being one
/// document. Ties are broken alphabetically.
pub fn tfidf_top_terms(
    corpus: &[Script],
    target: &str,
    k: usize,
) -> Result<Vec<TermScore>, AnalyticsError> {
    let pos = corpus
        .iter()
        .position(|s| s.id() == target)
        .ok_or_else(|| AnalyticsError::UnknownScript(target.to_string()))?;
    let docs: Vec<Vec<String>> = corpus.iter().map(script_tokens).collect();
    let model = TfIdfModel::fit(&docs);
    if docs[pos].is_empty() {
        return Ok(Vec::new());
    }
    let mut scores: Vec<TermScore> = model
        .weigh(&docs[pos])
        .into_iter()
        .map(|(term, score)| TermScore { term, score })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
    scores.truncate(k);
    Ok(scores)
}

pub fn script_report(
    corpus: &[Script],
    target: &str,
    k: usize,
) -> Result<ScriptReport, AnalyticsError> {
    let top_terms = tfidf_top_terms(corpus, target, k)?;
    let script = corpus.iter().find(|s| s.id() == target).expect("checked above");
    let exchange_pairs = script
        .turns()
        .windows(2)
        .filter(|w| w[0].speaker == Speaker::Interviewer && w[1].speaker == Speaker::Stakeholder)
        .count();
    Ok(ScriptReport {
        script_id: target.to_string(),
        total_turns: script.len(),
        exchange_pairs,
        interviewer: speaker_stats(script, Speaker::Interviewer),
        stakeholder: speaker_stats(script, Speaker::Stakeholder),
        top_terms,
    })
}

/// Reports for every script of the corpus, in corpus order.
pub fn corpus_reports(corpus: &[Script], k: usize) -> Result<Vec<ScriptReport>, AnalyticsError> {
    if corpus.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    corpus
        .iter()
        .map(|s| script_report(corpus, s.id(), k))
        .collect()
}

fn speaker_cells(s: &SpeakerStats) -> [String; 6] {
    let (range, q1, mdn, q3) = match &s.lengths {
        Some(l) => (
            format!("{}-{}", l.min, l.max),
            format!("{:.0}", l.q1.round()),
            format!("{:.0}", l.median.round()),
            format!("{:.0}", l.q3.round()),
        ),
        None => ("-".into(), "-".into(), "-".into(), "-".into()),
    };
    [range, q1, mdn, q3, s.acts.nq.to_string(), s.acts.q.to_string()]
}

/// Fixed-width table, one row per report in input order.
pub fn render_report_table(reports: &[ScriptReport]) -> Result<String, AnalyticsError> {
    if reports.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let header: Vec<String> = [
        "Script", "I len", "I Q1", "I Mdn", "I Q3", "I NQ", "I Q", "S len", "S Q1", "S Mdn",
        "S Q3", "S NQ", "S Q", "Top terms",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.script_id.clone()];
            row.extend(speaker_cells(&r.interviewer));
            row.extend(speaker_cells(&r.stakeholder));
            row.push(
                r.top_terms
                    .iter()
                    .map(|t| t.term.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            row
        })
        .collect();

    let ncols = header.len();
    let widths: Vec<usize> = (0..ncols)
        .map(|c| {
            std::iter::once(&header)
                .chain(rows.iter())
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();

    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let mut l = String::new();
        for (c, cell) in cells.iter().enumerate() {
            if c + 1 == ncols {
                l.push_str(cell);
            } else {
                let _ = write!(l, "{:<w$}  ", cell, w = widths[c]);
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&header, &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&rule, &mut out);
    for row in &rows {
        line(row, &mut out);
    }
    Ok(out)
}
