use std::path::PathBuf;

use clap::Args;
use elicit_core::analytics::{corpus_reports, render_report_table, ScriptReport, SHORT_TURN_WORDS};
use serde::Serialize;

use super::{load_scripts, parse_aliases, print_json, InputFormat};
use crate::status::{CmdResult, ExitStatus, WithStatus};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Script files; together they form the TF-IDF corpus
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Number of top TF-IDF terms per script
    #[arg(short = 'k', long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// Map a transcript label to a role, e.g. `Analyst=interviewer`
    #[arg(long = "alias", value_name = "LABEL=ROLE")]
    pub aliases: Vec<String>,
    /// Print the reports as JSON instead of tables
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    reports: &'a [ScriptReport],
}

fn fmt_mean(m: Option<f64>) -> String {
    m.map_or_else(|| "-".into(), |m| format!("{m:.1}"))
}

pub fn run(args: &AnalyzeArgs) -> CmdResult {
    let aliases = parse_aliases(&args.aliases)?;
    let scripts = load_scripts(&args.files, args.format, &aliases)?;
    let reports = corpus_reports(&scripts, args.top).status(ExitStatus::Validation)?;
    if args.json {
        return print_json(&AnalyzeOutput { reports: &reports });
    }
    out!("{}", render_report_table(&reports).status(ExitStatus::Validation)?);
    outln!();
    for r in &reports {
        outln!(
            "{}: {} turns, {} interviewer-stakeholder pairs; mean words I {} / S {}; turns under {} words I {} / S {}",
            r.script_id,
            r.total_turns,
            r.exchange_pairs,
            fmt_mean(r.interviewer.mean_length),
            fmt_mean(r.stakeholder.mean_length),
            SHORT_TURN_WORDS,
            r.interviewer.short_turns,
            r.stakeholder.short_turns,
        );
    }
    Ok(())
}
