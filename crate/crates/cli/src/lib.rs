//! `elicit`: generate requirements-elicitation interview scripts and
//! evaluate them.

/// `println!` that ignores a closed stdout (e.g. when piped into `head`).
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

pub mod commands;
pub mod config;
pub mod status;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{analyze, fetch, generate, lint, rubric, score};
use config::{locate_config_file, AppConfig, ConfigLayer};
use status::{CmdResult, ExitStatus, WithStatus};

#[derive(Debug, Parser)]
#[command(
    name = "elicit",
    version,
    about = "Generate and evaluate requirements-elicitation interview scripts"
)]
pub struct Cli {
    /// TOML config file (default: $ELICIT_CONFIG, then ./elicit.toml)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output; repeat for debug
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(flatten)]
    pub overrides: ConfigLayer,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an interview script through the outline and section chain
    Generate(generate::GenerateArgs),
    /// Generate and print only the section outline
    Outline(generate::OutlineArgs),
    /// Turn-length, dialogue-act and key-term statistics
    Analyze(analyze::AnalyzeArgs),
    /// Per-turn quality scores
    Score(score::ScoreArgs),
    /// Check scripts for common interviewing mistakes
    Lint(lint::LintArgs),
    /// Human evaluation records
    #[command(subcommand)]
    Rubric(rubric::RubricCommand),
    /// Download a file over HTTPS, optionally verifying and unpacking it
    Fetch(fetch::FetchArgs),
}

fn env_lookup(key: &str) -> Option<String> {
    std::env::var(key).ok().filter(|v| !v.is_empty())
}

pub fn resolve_config(cli: &Cli) -> anyhow::Result<AppConfig> {
    let file = match locate_config_file(cli.config.as_deref(), env_lookup)? {
        Some(path) => ConfigLayer::from_file(&path)?,
        None => ConfigLayer::default(),
    };
    let env = ConfigLayer::from_env(env_lookup)?;
    AppConfig::resolve(file, env, cli.overrides.clone())
}

fn dispatch(cli: &Cli) -> CmdResult {
    let cfg = resolve_config(cli).status(ExitStatus::Config)?;
    match &cli.command {
        Command::Generate(a) => generate::run_generate(a, &cfg),
        Command::Outline(a) => generate::run_outline(a, &cfg),
        Command::Analyze(a) => analyze::run(a),
        Command::Score(a) => score::run(a, &cfg),
        Command::Lint(a) => lint::run(a),
        Command::Rubric(c) => rubric::run(c, &cfg),
        Command::Fetch(a) => fetch::run(a, &cfg),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Config
            } else {
                ExitStatus::Success
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    match dispatch(&cli) {
        Ok(()) => ExitStatus::Success,
        Err(f) => {
            eprintln!("error: {f}");
            f.status
        }
    }
}
