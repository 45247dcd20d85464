use std::sync::Mutex;

use elicit_core::chaingen::backend::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResponse, MockBackend,
    ScriptedBackend,
};
use elicit_core::chaingen::{
    concatenate, generate_outline, generate_section, run_chain, ChainError, ChainLog, ChainState,
    GenerationConfig, LogicalClock, Outline, OutlineSection,
};
use elicit_core::knowledge::{KnowledgeBase, KnowledgeDoc, KnowledgeKind, TokenEstimator};
use elicit_core::transcript::{Speaker, Turn};
use proptest::prelude::*;

const OUTLINE: &str = "1. Greeting — build rapport (turns: 2)\n\
                       2. As-Is — current process (turns: 4)\n\
                       3. Closing — summarize (turns: 2)\n";

fn knowledge() -> KnowledgeBase {
    let docs = vec![
        KnowledgeDoc {
            id: "guidelines.md".into(),
            kind: KnowledgeKind::Guidelines,
            text: "Greet the stakeholder and explain the purpose.\n\nSummarize at the end and ask for confirmation.".into(),
        },
        KnowledgeDoc {
            id: "pitfalls.md".into(),
            kind: KnowledgeKind::Pitfalls,
            text: "Avoid technical jargon and leading questions.".into(),
        },
        KnowledgeDoc {
            id: "sample.txt".into(),
            kind: KnowledgeKind::SampleScript,
            text: "Interviewer: Hello.\nStakeholder: Hi.".into(),
        },
    ];
    KnowledgeBase::new(docs, 200, TokenEstimator::default())
}

fn config() -> GenerationConfig {
    GenerationConfig::new("meeting scheduler system")
}

/// Delegates to [`MockBackend`] and keeps every request.
#[derive(Default)]
struct Capturing {
    inner: MockBackend,
    seen: Mutex<Vec<CompletionRequest>>,
}

impl CompletionBackend for Capturing {
    fn complete(&self, r: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        self.seen.lock().unwrap().push(r.clone());
        self.inner.complete(r)
    }
}

fn section_turns(text: &str) -> Vec<String> {
    text.lines().map(str::to_string).collect()
}

#[test]
fn mock_chain_shape() {
    let backend = MockBackend::new();
    let mut log = ChainLog::new();
    let out = run_chain(&config(), &knowledge(), &backend, &LogicalClock::default(), &mut log).unwrap();
    assert_eq!(out.outline.len(), 5);
    assert_eq!(backend.calls(), 1 + 5);
    assert_eq!(log.len(), backend.calls());
    let expected: usize = out.outline.sections.iter().map(|s| s.target_turns).sum();
    assert_eq!(out.script.len(), expected);
    assert_eq!(out.script.id(), "meeting-scheduler-system");
    assert_eq!(out.script.turns()[0].speaker, Speaker::Interviewer);
    assert!(out.script.turns()[0].text.starts_with("Hello"));
}

#[test]
fn mock_chain_is_deterministic() {
    let run = || {
        let mut log = ChainLog::new();
        let out = run_chain(&config(), &knowledge(), &MockBackend::new(), &LogicalClock::default(), &mut log)
            .unwrap();
        (out.script, log.to_jsonl())
    };
    assert_eq!(run(), run());
}

#[test]
fn section_prompts_carry_previous_tail() {
    let backend = Capturing::default();
    let mut cfg = config();
    cfg.carry_over_turns = 4;
    let mut log = ChainLog::new();
    run_chain(&cfg, &knowledge(), &backend, &LogicalClock::default(), &mut log).unwrap();
    let seen = backend.seen.lock().unwrap();
    assert_eq!(seen.len(), 6);
    for i in 2..seen.len() {
        let previous = &log.records()[i - 1].response.text;
        let lines = section_turns(previous);
        let tail = &lines[lines.len().saturating_sub(4)..];
        assert!(
            seen[i].user.contains(&tail.join("\n")),
            "prompt {i} lacks the tail of the previous section"
        );
    }
    assert!(seen[1].user.contains("(the interview has not started yet)"));
    // Grounding: section prompts are sent with retrieved knowledge.
    assert!(seen[1].system.contains("# Reference knowledge"));
}

#[test]
fn zero_carry_over_sends_no_tail() {
    let backend = Capturing::default();
    let mut cfg = config();
    cfg.carry_over_turns = 0;
    run_chain(&cfg, &knowledge(), &backend, &LogicalClock::default(), &mut ChainLog::new()).unwrap();
    let seen = backend.seen.lock().unwrap();
    assert!(seen[3].user.contains("(the interview has not started yet)"));
}

#[test]
fn canned_outline_parses_in_order() {
    let b = ScriptedBackend::texts([OUTLINE]);
    let o = generate_outline(&config(), &knowledge(), &b, &LogicalClock::default(), &mut ChainLog::new()).unwrap();
    let titles: Vec<_> = o.sections.iter().map(|s| s.title.as_str()).collect();
    assert_eq!(titles, ["Greeting", "As-Is", "Closing"]);
    assert_eq!(o.scenario, "meeting scheduler system");
}

#[test]
fn prose_outline_fails_after_repairs() {
    let prose = "We should first greet the stakeholder and then talk about things.";
    let b = ScriptedBackend::texts([prose, prose, prose, OUTLINE]);
    let err = generate_outline(&config(), &knowledge(), &b, &LogicalClock::default(), &mut ChainLog::new())
        .unwrap_err();
    assert!(matches!(err, ChainError::OutlineParseFailed { attempts: 3, .. }), "{err}");
    assert_eq!(b.calls(), 3);
    let repair = &b.requests()[1].user;
    assert!(repair.starts_with("Task: interview outline"));
    assert!(repair.contains(prose));
}

#[test]
fn repair_counts_toward_call_budget() {
    let two_turns = "Interviewer: Hello there, thanks for coming.\nStakeholder: Happy to help.";
    let b = ScriptedBackend::texts([
        "not an outline",
        OUTLINE,
        two_turns,
        "untagged prose",
        two_turns,
        two_turns,
    ]);
    let mut log = ChainLog::new();
    let out = run_chain(&config(), &knowledge(), &b, &LogicalClock::default(), &mut log).unwrap();
    // 1 outline + 3 sections + 2 repairs
    assert_eq!(b.calls(), 1 + 3 + 2);
    assert_eq!(log.len(), 6);
    assert_eq!(out.script.len(), 6);
}

#[test]
fn section_parsing() {
    let outline = generate_outline(
        &config(),
        &knowledge(),
        &ScriptedBackend::texts([OUTLINE]),
        &LogicalClock::default(),
        &mut ChainLog::new(),
    )
    .unwrap();
    let state = ChainState::new(outline.clone(), 6);
    let b = ScriptedBackend::texts(["Interviewer: Hi, how are you?\nStakeholder: Fine, thanks."]);
    let turns = generate_section(&config(), &state, &outline.sections[0], &knowledge(), &b, &LogicalClock::default(), &mut ChainLog::new()).unwrap();
    assert_eq!(turns.len(), 2);
    assert_eq!(turns[0].speaker, Speaker::Interviewer);
    assert_eq!(turns[1].speaker, Speaker::Stakeholder);

    let b = ScriptedBackend::texts(["just prose", "still prose", "more prose"]);
    let err = generate_section(&config(), &state, &outline.sections[0], &knowledge(), &b, &LogicalClock::default(), &mut ChainLog::new()).unwrap_err();
    assert!(matches!(err, ChainError::SectionParseFailed { section: 0, attempts: 3, .. }), "{err}");

    let b = ScriptedBackend::texts(["", " ", ""]);
    let err = generate_section(&config(), &state, &outline.sections[0], &knowledge(), &b, &LogicalClock::default(), &mut ChainLog::new()).unwrap_err();
    assert!(matches!(err, ChainError::EmptySection { section: 0 }));

    let b = ScriptedBackend::texts(["Interviewer: x"]);
    let err = generate_section(&config(), &state, &outline.sections[1], &knowledge(), &b, &LogicalClock::default(), &mut ChainLog::new()).unwrap_err();
    assert!(matches!(err, ChainError::OutOfOrder { expected: 0, got: 1 }));
    assert_eq!(b.calls(), 0);
}

#[test]
fn failure_on_second_section_keeps_partial_log() {
    let b = ScriptedBackend::new([
        Ok(CompletionResponse::complete(OUTLINE)),
        Ok(CompletionResponse::complete("Interviewer: Hello!\nStakeholder: Hi.")),
        Err(BackendError::Transport("connection reset".into())),
    ]);
    let mut log = ChainLog::new();
    let err = run_chain(&config(), &knowledge(), &b, &LogicalClock::default(), &mut log).unwrap_err();
    assert!(matches!(err, ChainError::Backend(BackendError::Transport(_))));
    assert_eq!(log.len(), 3);
    assert!(log.records()[0].request.user.starts_with("Task: interview outline"));
    assert_eq!(log.records()[1].response.text, "Interviewer: Hello!\nStakeholder: Hi.");
    assert!(log.records()[2].error.as_deref().unwrap().contains("connection reset"));
    assert!(log.records()[..2].iter().all(|r| r.error.is_none()));
}

#[test]
fn invalid_config_makes_no_calls() {
    let b = ScriptedBackend::texts([OUTLINE]);
    let mut cfg = config();
    cfg.scenario = "  ".into();
    assert!(matches!(
        run_chain(&cfg, &knowledge(), &b, &LogicalClock::default(), &mut ChainLog::new()),
        Err(ChainError::InvalidConfig(_))
    ));
    assert_eq!(b.calls(), 0);
}

fn outline_of(n: usize) -> Outline {
    Outline {
        scenario: "s".into(),
        sections: (0..n)
            .map(|i| OutlineSection {
                ordinal: i,
                title: format!("t{i}"),
                goal: "g".into(),
                target_turns: 2,
            })
            .collect(),
    }
}

fn turn_strategy() -> impl Strategy<Value = Turn> {
    (any::<bool>(), "[a-z]{1,8}( [a-z?.]{1,8}){0,6}", 0usize..50).prop_map(|(i, text, index)| Turn {
        index,
        speaker: if i { Speaker::Interviewer } else { Speaker::Stakeholder },
        text,
    })
}

proptest! {
    #[test]
    fn concatenate_preserves_order_and_content(
        sections in prop::collection::vec(prop::collection::vec(turn_strategy(), 1..8), 3..12)
    ) {
        let script = concatenate(&outline_of(sections.len()), &sections).unwrap();
        let flat: Vec<&Turn> = sections.iter().flatten().collect();
        prop_assert_eq!(script.len(), flat.len());
        for (i, (got, want)) in script.turns().iter().zip(flat).enumerate() {
            prop_assert_eq!(got.index, i);
            prop_assert_eq!(got.speaker, want.speaker);
            prop_assert_eq!(&got.text, &want.text);
        }
    }

    #[test]
    fn tail_is_suffix_of_completed(sizes in prop::collection::vec(1usize..9, 1..6), k in 0usize..10) {
        let mut st = ChainState::new(outline_of(sizes.len().max(3)), k);
        let mut all = Vec::new();
        for (s, n) in sizes.iter().enumerate() {
            let turns: Vec<Turn> = (0..*n)
                .map(|i| Turn { index: i, speaker: Speaker::Interviewer, text: format!("{s}-{i}") })
                .collect();
            all.extend(turns.clone());
            st.push_section(turns);
        }
        prop_assert_eq!(st.transcript_tail.len(), k.min(all.len()));
        prop_assert_eq!(&all[all.len() - st.transcript_tail.len()..], &st.transcript_tail[..]);
    }
}
