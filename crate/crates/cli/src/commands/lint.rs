use std::fs;
use std::path::PathBuf;

use clap::Args;
use elicit_core::rubric::{lint_script, LintFinding, LintPatterns, Severity};
use elicit_core::transcript::SpeakerAliases;
use serde::Serialize;

use super::{load_scripts, print_json, InputFormat};
use crate::status::{CmdResult, ExitStatus, WithStatus};

#[derive(Debug, Args)]
pub struct LintArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// JSON file replacing the bundled phrase lists
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct ScriptFindings {
    script_id: String,
    findings: Vec<LintFinding>,
}

#[derive(Serialize)]
struct LintOutput {
    scripts: Vec<ScriptFindings>,
}

pub fn run(args: &LintArgs) -> CmdResult {
    let patterns = match &args.patterns {
        Some(p) => {
            let raw = fs::read_to_string(p).status(ExitStatus::Config)?;
            LintPatterns::from_json(&raw).status(ExitStatus::Config)?
        }
        None => LintPatterns::default(),
    };
    let scripts = load_scripts(&args.files, args.format, &SpeakerAliases::new())?;
    let out = LintOutput {
        scripts: scripts
            .iter()
            .map(|s| ScriptFindings {
                script_id: s.id().to_string(),
                findings: lint_script(s, &patterns),
            })
            .collect(),
    };
    if args.json {
        return print_json(&out);
    }
    for s in &out.scripts {
        outln!("{}: {} finding(s)", s.script_id, s.findings.len());
        for f in &s.findings {
            let level = match f.severity {
                Severity::Warning => "warning",
                Severity::Info => "info",
            };
            let turns = if f.turn_refs.is_empty() {
                String::new()
            } else {
                let refs: Vec<String> = f.turn_refs.iter().map(usize::to_string).collect();
                format!(" [turns {}]", refs.join(", "))
            };
            let rule = serde_json::to_value(f.rule).ok();
            let rule = rule.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
            outln!("  {level:<7} {rule}: {}{turns}", f.message);
        }
    }
    Ok(())
}
