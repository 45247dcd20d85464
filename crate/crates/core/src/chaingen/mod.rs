//! Outline-based interview generation by prompt chaining.
//!
//! One outline prompt plans the sections; each section is then generated by
//! its own prompt that carries the scenario, the section goal, retrieved
//! knowledge and the last few turns written so far. The sections are
//! concatenated into one script.

pub mod backend;
mod log;

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{KnowledgeBase, KnowledgeError, KnowledgeKind};
use crate::transcript::{
    normalize_transcript, parse_script, Script, ScriptFormat, SpeakerAliases, TranscriptError, Turn,
};

pub use self::log::{ChainLog, Clock, ExchangeRecord, LogicalClock, SystemClock};
use backend::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse, FinishReason};

pub const SYSTEM_TEMPLATE: &str = include_str!("../../templates/system.txt");
pub const OUTLINE_TEMPLATE: &str = include_str!("../../templates/outline.txt");
pub const SECTION_TEMPLATE: &str = include_str!("../../templates/section.txt");
pub const REPAIR_TEMPLATE: &str = include_str!("../../templates/repair.txt");

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("outline could not be parsed after {attempts} attempt(s): {reason}")]
    OutlineParseFailed { attempts: usize, reason: String },
    #[error("section {section} could not be parsed after {attempts} attempt(s): {reason}")]
    SectionParseFailed {
        section: usize,
        attempts: usize,
        reason: String,
    },
    #[error("section {section} came back empty")]
    EmptySection { section: usize },
    #[error("outline has {expected} sections but {got} were generated")]
    SectionCountMismatch { expected: usize, got: usize },
    #[error("expected section {expected} next, got {got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineSection {
    pub ordinal: usize,
    pub title: String,
    pub goal: String,
    pub target_turns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outline {
    pub scenario: String,
    pub sections: Vec<OutlineSection>,
}

impl Outline {
    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Numbered listing in the same grammar [`parse_outline`] accepts.
    pub fn render(&self) -> String {
        self.sections
            .iter()
            .map(|s| {
                format!(
                    "{}. {} — {} (turns: {})\n",
                    s.ordinal + 1,
                    s.title,
                    s.goal,
                    s.target_turns
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlineRules {
    pub min_sections: usize,
    pub max_sections: usize,
    pub default_target_turns: usize,
}

impl Default for OutlineRules {
    fn default() -> Self {
        Self {
            min_sections: 3,
            max_sections: 12,
            default_target_turns: 8,
        }
    }
}

pub const MIN_TARGET_TURNS: usize = 2;

fn numbered_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[*_]{1,2})?(\d{1,2})[.)](?:[*_]{1,2})?\s+(.+?)\s*$").unwrap())
}

fn turns_note() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\(\s*(?:turns?\s*[:=]\s*~?(\d+)|~?(\d+)\s*turns?)\s*\)").unwrap()
    })
}

fn title_goal_split() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s+[—–-]\s+|\s*[—–]\s*|:\s+").unwrap())
}

/// Parses lines of the form `N. Title — goal (turns: T)`.
///
/// Lines that are not numbered are ignored. A missing turns annotation gets
/// `rules.default_target_turns`; targets below two are raised to two. The
/// result has an empty scenario.
pub fn parse_outline(text: &str, rules: &OutlineRules) -> Result<Outline, ChainError> {
    let fail = |reason: String| ChainError::OutlineParseFailed {
        attempts: 1,
        reason,
    };
    let mut sections = Vec::new();
    for line in text.lines() {
        let Some(caps) = numbered_line().captures(line) else {
            continue;
        };
        let mut body = caps[2].to_string();
        let mut target = rules.default_target_turns;
        if let Some(note) = turns_note().captures(&body) {
            target = note
                .get(1)
                .or_else(|| note.get(2))
                .and_then(|m| m.as_str().parse().ok())
                .unwrap_or(target);
            body = turns_note().replace(&body, "").into_owned();
        }
        let body = body.replace("**", "");
        let (title, goal) = match title_goal_split().find(&body) {
            Some(m) => (&body[..m.start()], &body[m.end()..]),
            None => (body.as_str(), ""),
        };
        let title = title.trim().trim_matches(|c| c == '*' || c == '_').trim();
        let goal = goal.trim().trim_end_matches(['.', ';']).trim();
        if title.is_empty() {
            return Err(fail(format!("section line without a title: `{}`", line.trim())));
        }
        sections.push(OutlineSection {
            ordinal: sections.len(),
            title: title.to_string(),
            goal: if goal.is_empty() { title.to_string() } else { goal.to_string() },
            target_turns: target.max(MIN_TARGET_TURNS),
        });
    }
    if sections.len() < rules.min_sections {
        return Err(fail(format!(
            "found {} numbered section(s), need at least {}",
            sections.len(),
            rules.min_sections
        )));
    }
    if sections.len() > rules.max_sections {
        return Err(fail(format!(
            "found {} numbered sections, at most {} allowed",
            sections.len(),
            rules.max_sections
        )));
    }
    Ok(Outline {
        scenario: String::new(),
        sections,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub scenario: String,
    pub script_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Trailing turns echoed into each section prompt.
    pub carry_over_turns: usize,
    pub context_budget: usize,
    pub retrieval_k: usize,
    /// Reformat attempts after an unparseable reply.
    pub repair_attempts: usize,
    pub outline: OutlineRules,
}

impl GenerationConfig {
    pub fn new(scenario: impl Into<String>) -> Self {
        let scenario = scenario.into();
        Self {
            script_id: slug(&scenario),
            scenario,
            temperature: 0.7,
            max_tokens: 1500,
            carry_over_turns: 6,
            context_budget: 3000,
            retrieval_k: 8,
            repair_attempts: 2,
            outline: OutlineRules::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let bad = |m: &str| Err(ChainError::InvalidConfig(m.to_string()));
        if self.scenario.trim().is_empty() {
            return bad("scenario is empty");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return bad("temperature must be a non-negative number");
        }
        if self.outline.min_sections == 0 || self.outline.min_sections > self.outline.max_sections {
            return bad("outline section bounds are inconsistent");
        }
        if self.retrieval_k == 0 {
            return bad("retrieval_k must be positive");
        }
        Ok(())
    }
}

/// Lowercase ASCII slug, e.g. "Meeting scheduler system" -> "meeting-scheduler-system".
pub fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "script".into()
    } else {
        out
    }
}

/// Running state of a chain: the outline, finished sections and the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub outline: Outline,
    pub completed_sections: Vec<Vec<Turn>>,
    pub transcript_tail: Vec<Turn>,
    carry_over: usize,
}

impl ChainState {
    pub fn new(outline: Outline, carry_over: usize) -> Self {
        Self {
            outline,
            completed_sections: Vec::new(),
            transcript_tail: Vec::new(),
            carry_over,
        }
    }

    pub fn next_section(&self) -> Option<&OutlineSection> {
        self.outline.sections.get(self.completed_sections.len())
    }

    pub fn is_complete(&self) -> bool {
        self.completed_sections.len() == self.outline.sections.len()
    }

    pub fn push_section(&mut self, turns: Vec<Turn>) {
        self.completed_sections.push(turns);
        let all: Vec<&Turn> = self.completed_sections.iter().flatten().collect();
        let start = all.len().saturating_sub(self.carry_over);
        self.transcript_tail = all[start..].iter().map(|t| (*t).clone()).collect();
    }
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

pub fn outline_prompt(config: &GenerationConfig) -> String {
    render(
        OUTLINE_TEMPLATE,
        &[
            ("scenario", config.scenario.as_str()),
            ("min_sections", &config.outline.min_sections.to_string()),
            ("max_sections", &config.outline.max_sections.to_string()),
        ],
    )
}

fn position_guidance(ordinal: usize, total: usize) -> &'static str {
    if total == 1 {
        "This is the whole interview: greet the stakeholder, build rapport, and end by summarizing the discussion and asking the stakeholder to confirm it or add anything."
    } else if ordinal == 0 {
        "This is the first section: the interviewer greets the stakeholder, introduces themselves and the purpose of the interview, builds rapport, and asks about the stakeholder's role."
    } else if ordinal + 1 == total {
        "This is the last section: the interviewer summarizes the main points of the whole interview and asks the stakeholder to confirm the summary or add anything, then thanks them."
    } else {
        "This is a middle section: continue the conversation without greeting again, and move to the new topic with a natural spoken transition."
    }
}

pub fn section_prompt(state: &ChainState, section: &OutlineSection) -> String {
    let tail = if state.transcript_tail.is_empty() {
        "(the interview has not started yet)".to_string()
    } else {
        state
            .transcript_tail
            .iter()
            .map(|t| format!("{}: {}", t.speaker, t.text))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let total = state.outline.sections.len();
    render(
        SECTION_TEMPLATE,
        &[
            ("scenario", state.outline.scenario.as_str()),
            ("number", &(section.ordinal + 1).to_string()),
            ("total", &total.to_string()),
            ("title", &section.title),
            ("goal", &section.goal),
            ("target_turns", &section.target_turns.to_string()),
            ("outline", state.outline.render().trim_end()),
            ("position_guidance", position_guidance(section.ordinal, total)),
            ("tail", &tail),
        ],
    )
}

fn repair_prompt(original: &str, previous: &str, error: &str) -> String {
    format!(
        "{}\n\n{}",
        original.trim_end(),
        render(REPAIR_TEMPLATE, &[("error", error), ("previous", previous.trim())])
    )
}

/// Generation driver holding the backend, the clock and the exchange log.
pub struct Chain<'a> {
    config: &'a GenerationConfig,
    knowledge: &'a KnowledgeBase,
    backend: &'a dyn CompletionBackend,
    clock: &'a dyn Clock,
    log: &'a mut ChainLog,
}

impl<'a> Chain<'a> {
    pub fn new(
        config: &'a GenerationConfig,
        knowledge: &'a KnowledgeBase,
        backend: &'a dyn CompletionBackend,
        clock: &'a dyn Clock,
        log: &'a mut ChainLog,
    ) -> Self {
        Self {
            config,
            knowledge,
            backend,
            clock,
            log,
        }
    }

    fn exchange(&mut self, request: CompletionRequest) -> Result<CompletionResponse, ChainError> {
        let at = self.clock.now();
        match self.backend.complete(&request) {
            Ok(resp) if resp.finish_reason == FinishReason::BackendError => {
                let msg = format!("backend reported an error: {}", resp.text);
                self.log.push(request, resp, Some(msg.clone()), at);
                Err(BackendError::InvalidResponse(msg).into())
            }
            Ok(resp) => {
                if resp.finish_reason == FinishReason::LengthCapped {
                    ::log::warn!("completion hit the max_tokens cap; output may be truncated");
                }
                self.log.push(request, resp.clone(), None, at);
                Ok(resp)
            }
            Err(e) => {
                let failed = CompletionResponse {
                    text: String::new(),
                    finish_reason: FinishReason::BackendError,
                };
                self.log.push(request, failed, Some(e.to_string()), at);
                Err(e.into())
            }
        }
    }

    fn system_context(&self, query: &str, kinds: &[KnowledgeKind]) -> Result<String, ChainError> {
        let bundle = self.knowledge.context(
            SYSTEM_TEMPLATE,
            query,
            kinds,
            self.config.retrieval_k,
            self.config.context_budget,
        )?;
        Ok(bundle.render())
    }

    fn request(&self, system: &str, user: String) -> CompletionRequest {
        CompletionRequest {
            system: system.to_string(),
            user,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        }
    }

    pub fn generate_outline(&mut self) -> Result<Outline, ChainError> {
        self.config.validate()?;
        let query = format!(
            "interview structure sections greeting opening closing summary {}",
            self.config.scenario
        );
        let system = self.system_context(
            &query,
            &[KnowledgeKind::Guidelines, KnowledgeKind::SampleScript],
        )?;
        let original = outline_prompt(self.config);
        let mut user = original.clone();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let resp = self.exchange(self.request(&system, user))?;
            match parse_outline(&resp.text, &self.config.outline) {
                Ok(mut outline) => {
                    outline.scenario = self.config.scenario.clone();
                    return Ok(outline);
                }
                Err(e) if attempt > self.config.repair_attempts => {
                    let reason = match e {
                        ChainError::OutlineParseFailed { reason, .. } => reason,
                        other => other.to_string(),
                    };
                    return Err(ChainError::OutlineParseFailed {
                        attempts: attempt,
                        reason,
                    });
                }
                Err(e) => {
                    let reason = match e {
                        ChainError::OutlineParseFailed { reason, .. } => reason,
                        other => other.to_string(),
                    };
                    user = repair_prompt(&original, &resp.text, &reason);
                }
            }
        }
    }

    pub fn generate_section(
        &mut self,
        state: &ChainState,
        section: &OutlineSection,
    ) -> Result<Vec<Turn>, ChainError> {
        let expected = state.completed_sections.len();
        if section.ordinal != expected {
            return Err(ChainError::OutOfOrder {
                expected,
                got: section.ordinal,
            });
        }
        let query = format!("{} {} {}", section.title, section.goal, state.outline.scenario);
        let system = self.system_context(
            &query,
            &[
                KnowledgeKind::Guidelines,
                KnowledgeKind::Pitfalls,
                KnowledgeKind::SampleScript,
            ],
        )?;
        let original = section_prompt(state, section);
        let mut user = original.clone();
        let aliases = SpeakerAliases::new();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let resp = self.exchange(self.request(&system, user))?;
            let parsed = if resp.text.trim().is_empty() {
                Err(None)
            } else {
                parse_script(&normalize_transcript(&resp.text, &aliases), ScriptFormat::Plain)
                    .map_err(Some)
            };
            match parsed {
                Ok(script) => return Ok(script.turns().to_vec()),
                Err(e) if attempt > self.config.repair_attempts => {
                    return Err(match e {
                        None => ChainError::EmptySection {
                            section: section.ordinal,
                        },
                        Some(e) => ChainError::SectionParseFailed {
                            section: section.ordinal,
                            attempts: attempt,
                            reason: e.to_string(),
                        },
                    });
                }
                Err(e) => {
                    let reason = e.map_or_else(|| "the reply was empty".to_string(), |e| e.to_string());
                    user = repair_prompt(&original, &resp.text, &reason);
                }
            }
        }
    }

    /// Outline, then every section in order, then concatenation.
    pub fn run(&mut self) -> Result<ChainOutput, ChainError> {
        let outline = self.generate_outline()?;
        let mut state = ChainState::new(outline, self.config.carry_over_turns);
        while let Some(section) = state.next_section().cloned() {
            let turns = self.generate_section(&state, &section)?;
            state.push_section(turns);
        }
        let script = concatenate(&state.outline, &state.completed_sections)?
            .with_id(&self.config.script_id)
            .with_title(&self.config.scenario)
            .with_domain_label(&self.config.scenario);
        Ok(ChainOutput {
            outline: state.outline,
            script,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub outline: Outline,
    pub script: Script,
}

pub fn generate_outline(
    config: &GenerationConfig,
    knowledge: &KnowledgeBase,
    backend: &dyn CompletionBackend,
    clock: &dyn Clock,
    log: &mut ChainLog,
) -> Result<Outline, ChainError> {
    Chain::new(config, knowledge, backend, clock, log).generate_outline()
}

pub fn generate_section(
    config: &GenerationConfig,
    state: &ChainState,
    section: &OutlineSection,
    knowledge: &KnowledgeBase,
    backend: &dyn CompletionBackend,
    clock: &dyn Clock,
    log: &mut ChainLog,
) -> Result<Vec<Turn>, ChainError> {
    Chain::new(config, knowledge, backend, clock, log).generate_section(state, section)
}

/// Runs the whole chain. `log` keeps every exchange even when the run fails.
pub fn run_chain(
    config: &GenerationConfig,
    knowledge: &KnowledgeBase,
    backend: &dyn CompletionBackend,
    clock: &dyn Clock,
    log: &mut ChainLog,
) -> Result<ChainOutput, ChainError> {
    Chain::new(config, knowledge, backend, clock, log).run()
}

/// Joins section turn lists in outline order and renumbers indices.
pub fn concatenate(outline: &Outline, sections: &[Vec<Turn>]) -> Result<Script, ChainError> {
    if sections.len() != outline.sections.len() {
        return Err(ChainError::SectionCountMismatch {
            expected: outline.sections.len(),
            got: sections.len(),
        });
    }
    if let Some(pos) = sections.iter().position(Vec::is_empty) {
        return Err(ChainError::EmptySection { section: pos });
    }
    Ok(Script::from_turns(
        "",
        outline.scenario.as_str(),
        outline.scenario.as_str(),
        sections.iter().flatten().cloned(),
    )?)
}
