//! Interview script data model.
//!
//! A [`Script`] is an ordered list of speaker-attributed [`Turn`]s between one
//! interviewer and one stakeholder. Scripts are exchanged in two formats:
//!
//! * **plain**: UTF-8 text where every turn starts on a line tagged
//!   `Interviewer:` or `Stakeholder:`. Continuation lines belong to the
//!   previous turn. Lines starting with `#` are comments; `# id:`, `# title:`
//!   and `# domain:` carry script metadata.
//! * **structured**: a JSON document
//!   `{id, title, domain_label, turns: [{speaker, text}]}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("no speaker tag found")]
    NoTurnsFound,
    #[error("line {line}: unknown speaker `{label}`")]
    UnknownSpeaker { line: usize, label: String },
    #[error("line {line}: speaker tag without an utterance")]
    EmptyUtterance { line: usize },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("malformed structured script at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl TranscriptError {
    /// 1-based source line the error points at, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::UnknownSpeaker { line, .. }
            | Self::EmptyUtterance { line }
            | Self::Malformed { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Speaker {
    Interviewer,
    Stakeholder,
}

impl Speaker {
    pub const ALL: [Speaker; 2] = [Speaker::Interviewer, Speaker::Stakeholder];

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Interviewer => "Interviewer",
            Speaker::Stakeholder => "Stakeholder",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Speaker {
    type Err = TranscriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interviewer" => Ok(Speaker::Interviewer),
            "stakeholder" => Ok(Speaker::Stakeholder),
            other => Err(TranscriptError::UnknownSpeaker {
                line: 0,
                label: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DialogueAct {
    Question,
    NonQuestion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptFormat {
    Plain,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn word_count(&self) -> usize {
        tokenize_words(&self.text).len()
    }

    pub fn act(&self) -> DialogueAct {
        classify_turn(self)
    }
}

/// An ordered, non-empty interview transcript.
///
/// Fields are private so that the index invariant (`turns[i].index == i`)
/// and the non-empty utterance invariant always hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Script {
    id: String,
    title: String,
    domain_label: String,
    turns: Vec<Turn>,
}

impl Script {
    /// Builds a script from `(speaker, text)` pairs. Utterance text is
    /// normalized: each line is trimmed, blank lines dropped, and the rest
    /// joined with single spaces.
    pub fn new<I, S>(
        id: impl Into<String>,
        title: impl Into<String>,
        domain_label: impl Into<String>,
        utterances: I,
    ) -> Result<Self, TranscriptError>
    where
        I: IntoIterator<Item = (Speaker, S)>,
        S: AsRef<str>,
    {
        let mut turns = Vec::new();
        for (index, (speaker, text)) in utterances.into_iter().enumerate() {
            let text = normalize_utterance(text.as_ref());
            if text.is_empty() {
                return Err(TranscriptError::InvalidScript(format!(
                    "turn {index} has empty text"
                )));
            }
            turns.push(Turn {
                index,
                speaker,
                text,
            });
        }
        if turns.is_empty() {
            return Err(TranscriptError::InvalidScript(
                "a script needs at least one turn".into(),
            ));
        }
        Ok(Self {
            id: single_line(&id.into()),
            title: single_line(&title.into()),
            domain_label: single_line(&domain_label.into()),
            turns,
        })
    }

    /// Rebuilds a script from turns taken elsewhere, renumbering indices.
    pub fn from_turns(
        id: impl Into<String>,
        title: impl Into<String>,
        domain_label: impl Into<String>,
        turns: impl IntoIterator<Item = Turn>,
    ) -> Result<Self, TranscriptError> {
        Self::new(
            id,
            title,
            domain_label,
            turns.into_iter().map(|t| (t.speaker, t.text)),
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn domain_label(&self) -> &str {
        &self.domain_label
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn turns_by(&self, speaker: Speaker) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(move |t| t.speaker == speaker)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = single_line(&id.into());
        self
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = single_line(&title.into());
        self
    }

    pub fn with_domain_label(mut self, label: impl Into<String>) -> Self {
        self.domain_label = single_line(&label.into());
        self
    }
}

fn normalize_utterance(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // A label is a single word followed by a colon and then whitespace or
    // end of line, so "http://" and "10:30" are not tags.
    RE.get_or_init(|| Regex::new(r"^\s*([A-Za-z][A-Za-z0-9_-]*)\s*:(?:\s+|$)(.*)$").unwrap())
}

fn meta_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^#\s*(id|title|domain)\s*:\s*(.*)$").unwrap())
}

/// Recognizes a speaker tag at the start of `line`.
///
/// Known roles match case-insensitively. Any other capitalized single-word
/// label (`Moderator:`) is reported as an unknown speaker; lowercase labels
/// (`note: ...`) are treated as ordinary continuation text.
fn match_tag(line: &str, lineno: usize) -> Result<Option<(Speaker, &str)>, TranscriptError> {
    let Some(caps) = tag_regex().captures(line) else {
        return Ok(None);
    };
    let label = caps.get(1).unwrap().as_str();
    let rest = caps.get(2).map_or("", |m| m.as_str());
    match label.parse::<Speaker>() {
        Ok(speaker) => Ok(Some((speaker, rest))),
        Err(_) if label.starts_with(|c: char| c.is_ascii_uppercase()) => {
            Err(TranscriptError::UnknownSpeaker {
                line: lineno,
                label: label.to_string(),
            })
        }
        Err(_) => Ok(None),
    }
}

pub fn parse_script(raw: &str, format: ScriptFormat) -> Result<Script, TranscriptError> {
    match format {
        ScriptFormat::Plain => parse_plain(raw),
        ScriptFormat::Structured => parse_structured(raw),
    }
}

fn parse_plain(raw: &str) -> Result<Script, TranscriptError> {
    let mut meta: BTreeMap<&str, String> = BTreeMap::new();
    // (speaker, tag line, collected lines)
    let mut open: Vec<(Speaker, usize, Vec<&str>)> = Vec::new();

    for (i, line) in raw.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            if let Some(caps) = meta_regex().captures(trimmed) {
                let key = caps.get(1).unwrap().as_str();
                meta.insert(key, caps.get(2).unwrap().as_str().trim().to_string());
            }
            continue;
        }
        match match_tag(line, lineno)? {
            Some((speaker, rest)) => open.push((speaker, lineno, vec![rest])),
            // Text before the first tag is preamble and is ignored.
            None => {
                if let Some((_, _, lines)) = open.last_mut() {
                    lines.push(trimmed);
                }
            }
        }
    }

    if open.is_empty() {
        return Err(TranscriptError::NoTurnsFound);
    }
    let mut utterances = Vec::with_capacity(open.len());
    for (speaker, lineno, lines) in open {
        let text = normalize_utterance(&lines.join("\n"));
        if text.is_empty() {
            return Err(TranscriptError::EmptyUtterance { line: lineno });
        }
        utterances.push((speaker, text));
    }
    let get = |k: &str| meta.get(k).cloned().unwrap_or_default();
    Script::new(get("id"), get("title"), get("domain"), utterances)
}

#[derive(Serialize, Deserialize)]
struct StructuredTurn {
    speaker: Speaker,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct StructuredScript {
    #[serde(default)]
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    domain_label: String,
    turns: Vec<StructuredTurn>,
}

fn parse_structured(raw: &str) -> Result<Script, TranscriptError> {
    let doc: StructuredScript =
        serde_json::from_str(raw).map_err(|e| TranscriptError::Malformed {
            line: e.line(),
            message: e.to_string(),
        })?;
    if doc.turns.is_empty() {
        return Err(TranscriptError::NoTurnsFound);
    }
    if let Some(pos) = doc.turns.iter().position(|t| t.text.trim().is_empty()) {
        return Err(TranscriptError::InvalidScript(format!(
            "turn {pos} has empty text"
        )));
    }
    Script::new(
        doc.id,
        doc.title,
        doc.domain_label,
        doc.turns.into_iter().map(|t| (t.speaker, t.text)),
    )
}

pub fn serialize_script(script: &Script, format: ScriptFormat) -> String {
    match format {
        ScriptFormat::Plain => {
            let mut out = String::new();
            for (key, value) in [
                ("id", script.id()),
                ("title", script.title()),
                ("domain", script.domain_label()),
            ] {
                if !value.is_empty() {
                    out.push_str(&format!("# {key}: {value}\n"));
                }
            }
            for turn in script.turns() {
                out.push_str(&format!("{}: {}\n", turn.speaker, turn.text));
            }
            out
        }
        ScriptFormat::Structured => {
            let doc = StructuredScript {
                id: script.id.clone(),
                title: script.title.clone(),
                domain_label: script.domain_label.clone(),
                turns: script
                    .turns
                    .iter()
                    .map(|t| StructuredTurn {
                        speaker: t.speaker,
                        text: t.text.clone(),
                    })
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("script serializes");
            s.push('\n');
            s
        }
    }
}

/// Lowercases, splits on whitespace and strips leading/trailing
/// non-alphanumeric characters. Internal apostrophes and hyphens survive.
pub fn tokenize_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|piece| {
            piece
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Splits after `.`, `!` or `?` when followed by whitespace or end of text.
/// Abbreviations such as "e.g." are not special-cased.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                push_trimmed(&mut sentences, &text[start..end]);
                start = end;
            }
        }
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// One act per turn: a turn is a question iff it contains a `?`.
pub fn classify_turn(turn: &Turn) -> DialogueAct {
    if turn.text.contains('?') {
        DialogueAct::Question
    } else {
        DialogueAct::NonQuestion
    }
}

/// Maps third-party speaker labels (lowercased) onto the two roles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpeakerAliases(BTreeMap<String, Speaker>);

impl SpeakerAliases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: &str, speaker: Speaker) {
        self.0.insert(label.trim().to_lowercase(), speaker);
    }

    pub fn get(&self, label: &str) -> Option<Speaker> {
        self.0.get(&label.trim().to_lowercase()).copied()
    }

    /// Parses `label=role` pairs, e.g. `analyst=interviewer`.
    pub fn parse_pair(&mut self, pair: &str) -> Result<(), TranscriptError> {
        let (label, role) = pair.split_once('=').ok_or_else(|| {
            TranscriptError::InvalidScript(format!("alias `{pair}` is not of the form label=role"))
        })?;
        let speaker = role.parse::<Speaker>()?;
        self.insert(label, speaker);
        Ok(())
    }
}

fn label_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Optional markdown emphasis and a multi-word label, e.g. `**Analyst 1:**`.
    RE.get_or_init(|| {
        Regex::new(r"^\s*[*_]{0,2}\s*([A-Za-z][A-Za-z0-9 _.'-]{0,40}?)\s*[*_]{0,2}\s*:\s*[*_]{0,2}(?:\s+|$)(.*)$")
            .unwrap()
    })
}

/// Pre-pass for transcripts from other sources and for model output.
///
/// Blanks out markdown headings and horizontal rules, strips emphasis around
/// speaker labels, and rewrites labels found in `aliases` (or already naming
/// one of the roles) into canonical `Interviewer:` / `Stakeholder:` tags.
pub fn normalize_transcript(raw: &str, aliases: &SpeakerAliases) -> String {
    let mut out = String::with_capacity(raw.len());
    for line in raw.lines() {
        let trimmed = line.trim();
        // Dropped lines become blank so parse errors keep their line numbers.
        let decoration = (trimmed.starts_with('#') && !meta_regex().is_match(trimmed))
            || (!trimmed.is_empty() && trimmed.chars().all(|c| matches!(c, '-' | '*' | '_' | '=')));
        if decoration {
            out.push('\n');
            continue;
        }
        if let Some(caps) = label_line_regex().captures(line) {
            let label = caps.get(1).unwrap().as_str();
            let speaker = aliases.get(label).or_else(|| label.parse::<Speaker>().ok());
            if let Some(speaker) = speaker {
                let rest = caps.get(2).map_or("", |m| m.as_str()).trim();
                out.push_str(&format!("{speaker}: {rest}\n"));
                continue;
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}
