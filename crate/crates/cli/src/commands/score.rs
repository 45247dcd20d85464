use std::path::PathBuf;

use clap::Args;
use elicit_core::quality::{render_quality_table, QualityReport, QualityScorer, ScorerRegistry};
use elicit_core::transcript::SpeakerAliases;
use serde::Serialize;

use super::{load_scripts, print_json, InputFormat};
use crate::config::AppConfig;
use crate::status::{CmdResult, ExitStatus, WithStatus};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// Also print every turn's sub-scores
    #[arg(long)]
    pub per_turn: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    scorer: &'a str,
    reports: &'a [QualityReport],
}

pub fn run(args: &ScoreArgs, cfg: &AppConfig) -> CmdResult {
    let registry = ScorerRegistry::default();
    let grammar = registry.get(&cfg.scorer).status(ExitStatus::Config)?;
    let scorer = QualityScorer::new(grammar, cfg.weights);
    let scripts = load_scripts(&args.files, args.format, &SpeakerAliases::new())?;
    let reports = scripts
        .iter()
        .map(|s| scorer.score_script(s))
        .collect::<Result<Vec<_>, _>>()
        .status(ExitStatus::Validation)?;
    if args.json {
        return print_json(&ScoreOutput {
            scorer: grammar.name(),
            reports: &reports,
        });
    }
    out!("{}", render_quality_table(&reports));
    for r in &reports {
        outln!("{}: adjacent-turn coherence {:.2}", r.script_id, r.script_coherence);
    }
    if args.per_turn {
        for r in &reports {
            outln!("\n{}", r.script_id);
            outln!("turn  speaker      gram  nonred  focus  coher  composite");
            for t in &r.turns {
                let s = &t.score;
                outln!(
                    "{:<4}  {:<11}  {:.2}  {:.2}    {:.2}   {:.2}   {:.2}",
                    t.index,
                    t.speaker.to_string(),
                    s.grammaticality,
                    s.non_redundancy,
                    s.focus,
                    s.coherence,
                    s.composite
                );
            }
        }
    }
    Ok(())
}
