use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use elicit_core::chaingen::backend::{
    BackendError, CompletionBackend, HttpBackend, MockBackend, RecordingBackend, ReplayBackend,
};
use elicit_core::chaingen::{
    generate_outline, run_chain, slug, ChainError, ChainLog, Clock, GenerationConfig, LogicalClock,
    SystemClock,
};
use elicit_core::knowledge::{KnowledgeBase, TokenEstimator};
use elicit_core::transcript::{serialize_script, ScriptFormat};

use super::print_json;
use crate::config::AppConfig;
use crate::status::{fail, CmdResult, ExitStatus, Failure, WithStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Chat-completion endpoint from the config; needs the API key variable
    Http,
    /// Deterministic offline generator
    Mock,
    /// Recorded fixtures from `--fixtures`
    Replay,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Http)]
    pub backend: BackendKind,
    /// Fixture directory read by the replay backend
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Also store every http exchange as a replay fixture in this directory
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Short description of the system the interview is about
    #[arg(long)]
    pub scenario: String,
    /// Script id and output file stem (defaults to a slug of the scenario)
    #[arg(long)]
    pub id: Option<String>,
    /// Overwrite existing output files
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct OutlineArgs {
    #[arg(long)]
    pub scenario: String,
    /// Print the outline as JSON
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
}

fn backend_status(e: &BackendError) -> ExitStatus {
    match e {
        BackendError::MissingCredential(_) | BackendError::MissingFixture(_) => ExitStatus::Config,
        _ => ExitStatus::Backend,
    }
}

fn chain_failure(e: ChainError) -> Failure {
    let status = match &e {
        ChainError::Backend(b) => backend_status(b),
        ChainError::Knowledge(_) | ChainError::InvalidConfig(_) => ExitStatus::Config,
        ChainError::OutlineParseFailed { .. }
        | ChainError::SectionParseFailed { .. }
        | ChainError::EmptySection { .. }
        | ChainError::SectionCountMismatch { .. }
        | ChainError::OutOfOrder { .. }
        | ChainError::Transcript(_) => ExitStatus::Validation,
    };
    Failure {
        status,
        error: e.into(),
    }
}

/// Builds the backend and its clock. Offline backends get a logical clock
/// so their logs are reproducible. Fails before any network traffic when
/// the credential is missing.
fn build_backend(
    args: &BackendArgs,
    cfg: &AppConfig,
) -> CmdResult<(Box<dyn CompletionBackend>, Box<dyn Clock>)> {
    match args.backend {
        BackendKind::Mock => Ok((Box::new(MockBackend::new()), Box::new(LogicalClock::default()))),
        BackendKind::Replay => {
            let Some(dir) = &args.fixtures else {
                return fail(ExitStatus::Config, "--backend replay needs --fixtures <DIR>");
            };
            if !dir.is_dir() {
                return fail(
                    ExitStatus::Config,
                    format!("fixture directory {} does not exist", dir.display()),
                );
            }
            Ok((
                Box::new(ReplayBackend::new(dir, &cfg.model)),
                Box::new(LogicalClock::default()),
            ))
        }
        BackendKind::Http => {
            let http = HttpBackend::from_env(
                &cfg.endpoint,
                &cfg.model,
                &cfg.credential_env,
                Duration::from_secs(cfg.timeout_secs),
            )
            .map_err(|e| Failure {
                status: backend_status(&e),
                error: e.into(),
            })?;
            let backend: Box<dyn CompletionBackend> = match &args.record {
                Some(dir) => {
                    fs::create_dir_all(dir).status(ExitStatus::Config)?;
                    Box::new(RecordingBackend::new(http, dir, &cfg.model))
                }
                None => Box::new(http),
            };
            Ok((backend, Box::new(SystemClock)))
        }
    }
}

fn generation_config(scenario: &str, cfg: &AppConfig) -> GenerationConfig {
    let mut g = GenerationConfig::new(scenario);
    g.temperature = cfg.temperature;
    g.max_tokens = cfg.max_tokens;
    g.carry_over_turns = cfg.carry_over_turns;
    g.context_budget = cfg.context_budget;
    g.retrieval_k = cfg.retrieval_k;
    g
}

fn load_knowledge(cfg: &AppConfig) -> CmdResult<KnowledgeBase> {
    let dir = cfg.require_knowledge_dir().status(ExitStatus::Config)?;
    KnowledgeBase::load(dir, cfg.chunk_tokens, TokenEstimator::default()).status(ExitStatus::Config)
}

pub struct OutputPaths {
    pub plain: PathBuf,
    pub structured: PathBuf,
    pub outline: PathBuf,
    pub log: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: &Path, id: &str) -> Self {
        Self {
            plain: dir.join(format!("{id}.txt")),
            structured: dir.join(format!("{id}.json")),
            outline: dir.join(format!("{id}.outline.json")),
            log: dir.join(format!("{id}.chainlog.jsonl")),
        }
    }

    fn all(&self) -> [&Path; 4] {
        [&self.plain, &self.structured, &self.outline, &self.log]
    }
}

pub fn run_generate(args: &GenerateArgs, cfg: &AppConfig) -> CmdResult {
    let id = args.id.clone().unwrap_or_else(|| slug(&args.scenario));
    let paths = OutputPaths::new(&cfg.output_dir, &id);
    let (backend, clock) = build_backend(&args.backend, cfg)?;
    let knowledge = load_knowledge(cfg)?;
    if !args.force {
        if let Some(existing) = paths.all().into_iter().find(|p| p.exists()) {
            return fail(
                ExitStatus::Validation,
                format!("{} already exists; pass --force to overwrite", existing.display()),
            );
        }
    }
    fs::create_dir_all(&cfg.output_dir).status(ExitStatus::Config)?;

    let mut gen = generation_config(&args.scenario, cfg);
    gen.script_id = id;
    let mut log = ChainLog::new();
    log::info!("generating `{}` into {}", gen.script_id, cfg.output_dir.display());
    let result = run_chain(&gen, &knowledge, backend.as_ref(), clock.as_ref(), &mut log);
    log.write(&paths.log).status(ExitStatus::Config)?;
    let out = result.map_err(|e| {
        eprintln!("partial chain log kept at {}", paths.log.display());
        chain_failure(e)
    })?;

    fs::write(&paths.plain, serialize_script(&out.script, ScriptFormat::Plain)).status(ExitStatus::Config)?;
    fs::write(&paths.structured, serialize_script(&out.script, ScriptFormat::Structured))
        .status(ExitStatus::Config)?;
    let outline = serde_json::to_string_pretty(&out.outline).status(ExitStatus::Validation)? + "\n";
    fs::write(&paths.outline, outline).status(ExitStatus::Config)?;
    log::info!("wrote {} and {}", paths.plain.display(), paths.structured.display());

    outln!(
        "{}: {} sections, {} turns, {} backend calls",
        out.script.id(),
        out.outline.len(),
        out.script.len(),
        log.len()
    );
    for p in paths.all() {
        outln!("  wrote {}", p.display());
    }
    Ok(())
}

pub fn run_outline(args: &OutlineArgs, cfg: &AppConfig) -> CmdResult {
    let (backend, clock) = build_backend(&args.backend, cfg)?;
    let knowledge = load_knowledge(cfg)?;
    let gen = generation_config(&args.scenario, cfg);
    let mut log = ChainLog::new();
    let outline = generate_outline(&gen, &knowledge, backend.as_ref(), clock.as_ref(), &mut log)
        .map_err(chain_failure)?;
    if args.json {
        print_json(&outline)
    } else {
        out!("{}", outline.render());
        Ok(())
    }
}
