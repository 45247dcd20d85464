use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use elicit_core::rubric::{
    aggregate, new_evaluation_template, record_file_name, validate_evaluation, EvaluationRecord,
};
use elicit_core::transcript::SpeakerAliases;

use super::{load_scripts, print_json, InputFormat};
use crate::config::AppConfig;
use crate::status::{fail, CmdResult, ExitStatus, WithStatus};

#[derive(Debug, Subcommand)]
pub enum RubricCommand {
    /// Write one blank evaluation file per script and evaluator
    Init(InitArgs),
    /// Validate filled evaluation files
    Check(FilesArgs),
    /// Aggregate valid evaluation files into score tables
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(required = true)]
    pub scripts: Vec<PathBuf>,
    #[arg(long = "evaluator", required = true)]
    pub evaluators: Vec<String>,
    /// Target directory (defaults to `<output_dir>/rubric`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct FilesArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

pub fn run(cmd: &RubricCommand, cfg: &AppConfig) -> CmdResult {
    match cmd {
        RubricCommand::Init(a) => init(a, cfg),
        RubricCommand::Check(a) => {
            let records = check_all(&a.files)?;
            outln!("{} evaluation file(s) valid", records.len());
            Ok(())
        }
        RubricCommand::Report(a) => {
            let records = check_all(&a.files)?;
            let tables = aggregate(&records).status(ExitStatus::Validation)?;
            if a.json {
                return print_json(&tables);
            }
            out!("{}", tables.render_natural_language());
            outln!();
            out!("{}", tables.render_rubric());
            Ok(())
        }
    }
}

fn init(args: &InitArgs, cfg: &AppConfig) -> CmdResult {
    let dir = args.out.clone().unwrap_or_else(|| cfg.output_dir.join("rubric"));
    let scripts = load_scripts(&args.scripts, InputFormat::Auto, &SpeakerAliases::new())?;
    let mut planned = Vec::new();
    for s in &scripts {
        for e in &args.evaluators {
            if e.trim().is_empty() {
                return fail(ExitStatus::Config, "evaluator ids must not be empty");
            }
            planned.push((dir.join(record_file_name(s.id(), e)), new_evaluation_template(s, e)));
        }
    }
    if !args.force {
        if let Some((p, _)) = planned.iter().find(|(p, _)| p.exists()) {
            return fail(
                ExitStatus::Validation,
                format!("{} already exists; pass --force to overwrite", p.display()),
            );
        }
    }
    fs::create_dir_all(&dir).status(ExitStatus::Config)?;
    for (path, doc) in &planned {
        fs::write(path, doc.to_json()).status(ExitStatus::Config)?;
        outln!("wrote {}", path.display());
    }
    Ok(())
}

fn check_one(path: &Path) -> Result<EvaluationRecord, Vec<String>> {
    let raw = fs::read_to_string(path).map_err(|e| vec![e.to_string()])?;
    validate_evaluation(&raw).map_err(|errs| errs.iter().map(ToString::to_string).collect())
}

/// Validates every file, printing all problems before failing.
fn check_all(files: &[PathBuf]) -> CmdResult<Vec<EvaluationRecord>> {
    let mut records = Vec::new();
    let mut bad = 0;
    for f in files {
        match check_one(f) {
            Ok(r) => records.push(r),
            Err(errs) => {
                bad += 1;
                for e in errs {
                    eprintln!("{}: {e}", f.display());
                }
            }
        }
    }
    if bad > 0 {
        return fail(
            ExitStatus::Validation,
            format!("{bad} of {} evaluation file(s) invalid", files.len()),
        );
    }
    Ok(records)
}
