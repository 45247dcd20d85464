//! Pattern heuristics for common interviewing mistakes.
//!
//! Findings are advisory. Each rule matches lowercase phrases from
//! [`LintPatterns`] against the token sequence of a turn, so "hi" matches
//! the word "hi" but not "this".

use serde::{Deserialize, Serialize};

use crate::transcript::{classify_turn, tokenize_words, DialogueAct, Script, Speaker, Turn};

const DEFAULT_PATTERNS: &str = include_str!("../../data/lint_patterns.json");

/// Fraction of trailing interviewer turns searched for a closing summary.
const CLOSING_WINDOW: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintPatterns {
    pub other_stakeholders: Vec<String>,
    pub greeting: Vec<String>,
    pub summary: Vec<String>,
    pub approval: Vec<String>,
    pub written_register: Vec<String>,
}

impl Default for LintPatterns {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_PATTERNS).expect("bundled lint patterns parse")
    }
}

impl LintPatterns {
    pub fn from_json(raw: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MistakeTag {
    InfluencingStakeholder,
    UnnaturalDialogueStyle,
    IgnoringOtherStakeholders,
    TechnicalJargon,
    LackOfClarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StructuralCheck {
    GreetingPresent,
    ClosingSummary,
    StakeholderQuestions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum FindingTag {
    Mistake(MistakeTag),
    Structural(StructuralCheck),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintRule {
    OtherStakeholders,
    GreetingPresent,
    ClosingSummary,
    WrittenRegister,
    StakeholderQuestions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintFinding {
    pub rule: LintRule,
    pub tag: FindingTag,
    pub severity: Severity,
    pub turn_refs: Vec<usize>,
    pub message: String,
}

struct Normalized<'a> {
    turn: &'a Turn,
    padded: String,
}

fn pad(text: &str) -> String {
    format!(" {} ", tokenize_words(text).join(" "))
}

impl Normalized<'_> {
    fn has_any(&self, patterns: &[String]) -> bool {
        patterns.iter().any(|p| {
            let needle = pad(p);
            needle.trim().len() > 0 && self.padded.contains(&needle)
        })
    }
}

pub fn lint_script(script: &Script, patterns: &LintPatterns) -> Vec<LintFinding> {
    let turns: Vec<Normalized> = script
        .turns()
        .iter()
        .map(|turn| Normalized {
            turn,
            padded: pad(&turn.text),
        })
        .collect();
    let interviewer: Vec<&Normalized> = turns
        .iter()
        .filter(|t| t.turn.speaker == Speaker::Interviewer)
        .collect();
    let mut findings = Vec::new();

    let asks_about_others = interviewer.iter().any(|t| {
        classify_turn(t.turn) == DialogueAct::Question && t.has_any(&patterns.other_stakeholders)
    });
    if !asks_about_others {
        findings.push(LintFinding {
            rule: LintRule::OtherStakeholders,
            tag: FindingTag::Mistake(MistakeTag::IgnoringOtherStakeholders),
            severity: Severity::Warning,
            turn_refs: Vec::new(),
            message: "the interviewer never asks about other stakeholders".into(),
        });
    }

    match interviewer.first() {
        Some(first) if first.has_any(&patterns.greeting) => {}
        first => findings.push(LintFinding {
            rule: LintRule::GreetingPresent,
            tag: FindingTag::Structural(StructuralCheck::GreetingPresent),
            severity: Severity::Info,
            turn_refs: first.map(|t| vec![t.turn.index]).unwrap_or_default(),
            message: "the first interviewer turn has no greeting".into(),
        }),
    }

    let window = ((interviewer.len() as f64 * CLOSING_WINDOW).ceil() as usize).max(1);
    let closing = &interviewer[interviewer.len().saturating_sub(window)..];
    let summarized = closing.iter().any(|t| t.has_any(&patterns.summary));
    let approved = closing.iter().any(|t| t.has_any(&patterns.approval));
    if !summarized && !approved {
        findings.push(LintFinding {
            rule: LintRule::ClosingSummary,
            tag: FindingTag::Structural(StructuralCheck::ClosingSummary),
            severity: Severity::Warning,
            turn_refs: closing.iter().map(|t| t.turn.index).collect(),
            message: "the closing turns neither summarize nor ask for approval".into(),
        });
    }

    let written: Vec<usize> = turns
        .iter()
        .filter(|t| t.has_any(&patterns.written_register))
        .map(|t| t.turn.index)
        .collect();
    if !written.is_empty() {
        findings.push(LintFinding {
            rule: LintRule::WrittenRegister,
            tag: FindingTag::Mistake(MistakeTag::UnnaturalDialogueStyle),
            severity: Severity::Info,
            message: format!("written-language phrasing in {} turn(s)", written.len()),
            turn_refs: written,
        });
    }

    let stakeholder_questions = turns
        .iter()
        .filter(|t| t.turn.speaker == Speaker::Stakeholder)
        .filter(|t| classify_turn(t.turn) == DialogueAct::Question)
        .count();
    if stakeholder_questions == 0 {
        findings.push(LintFinding {
            rule: LintRule::StakeholderQuestions,
            tag: FindingTag::Structural(StructuralCheck::StakeholderQuestions),
            severity: Severity::Info,
            turn_refs: Vec::new(),
            message: "the stakeholder never asks a question".into(),
        });
    }

    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{parse_script, ScriptFormat};

    fn rules(raw: &str) -> Vec<LintRule> {
        let s = parse_script(raw, ScriptFormat::Plain).unwrap();
        lint_script(&s, &LintPatterns::default())
            .into_iter()
            .map(|f| f.rule)
            .collect()
    }

    #[test]
    fn defaults_load() {
        let p = LintPatterns::default();
        assert!(p.other_stakeholders.contains(&"who else".to_string()));
        assert!(p.written_register.contains(&"the next section".to_string()));
    }

    #[test]
    fn next_section_flagged_with_index() {
        let s = parse_script(
            "Interviewer: Hello, thank you for joining.\nStakeholder: Sure, can we start?\nInterviewer: In the next section we will discuss payments.",
            ScriptFormat::Plain,
        )
        .unwrap();
        let f = lint_script(&s, &LintPatterns::default());
        let w = f.iter().find(|f| f.rule == LintRule::WrittenRegister).unwrap();
        assert_eq!(w.turn_refs, vec![2]);
        assert_eq!(w.tag, FindingTag::Mistake(MistakeTag::UnnaturalDialogueStyle));
    }

    #[test]
    fn greeting_and_closing_present() {
        let r = rules(
            "Interviewer: Hello, thank you for joining.\nStakeholder: Happy to help.\nInterviewer: To summarize, you need a calendar. Does that sound correct?\nStakeholder: Yes.",
        );
        assert!(!r.contains(&LintRule::GreetingPresent));
        assert!(!r.contains(&LintRule::ClosingSummary));
        assert!(r.contains(&LintRule::OtherStakeholders));
        assert!(r.contains(&LintRule::StakeholderQuestions));
    }

    #[test]
    fn substring_is_not_a_word_match() {
        let r = rules("Interviewer: This is it.\nStakeholder: Ok?");
        assert!(r.contains(&LintRule::GreetingPresent));
    }

    #[test]
    fn other_stakeholder_requires_question_turn() {
        let r = rules("Interviewer: Hi. Who else uses it?\nStakeholder: Ok?");
        assert!(!r.contains(&LintRule::OtherStakeholders));
        let r = rules("Interviewer: Hi. I will ask who else uses it.\nStakeholder: Ok?");
        assert!(r.contains(&LintRule::OtherStakeholders));
    }

    #[test]
    fn stakeholder_only_script() {
        let s = parse_script("Stakeholder: Hi there.", ScriptFormat::Plain).unwrap();
        let f = lint_script(&s, &LintPatterns::default());
        for fi in &f {
            assert!(fi.turn_refs.iter().all(|&i| i < s.len()));
        }
        assert!(f.iter().any(|f| f.rule == LintRule::GreetingPresent));
    }
}
