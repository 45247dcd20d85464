//! Layered configuration: command-line flags over `ELICIT_*` environment
//! variables over the TOML config file over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use elicit_core::quality::MetricWeights;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CONFIG_FILE: &str = "elicit.toml";
pub const CONFIG_ENV: &str = "ELICIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppConfig {
    pub endpoint: String,
    pub model: String,
    pub credential_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub carry_over_turns: usize,
    pub context_budget: usize,
    pub retrieval_k: usize,
    pub chunk_tokens: usize,
    pub timeout_secs: u64,
    pub knowledge_dir: PathBuf,
    pub output_dir: PathBuf,
    pub scorer: String,
    pub weights: MetricWeights,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            credential_env: elicit_core::chaingen::backend::DEFAULT_CREDENTIAL_ENV.into(),
            temperature: 0.7,
            max_tokens: 1500,
            carry_over_turns: 6,
            context_budget: 3000,
            retrieval_k: 8,
            chunk_tokens: 160,
            timeout_secs: 120,
            knowledge_dir: PathBuf::from("knowledge"),
            output_dir: PathBuf::from("out"),
            scorer: "heuristic".into(),
            weights: MetricWeights::default(),
        }
    }
}

/// One configuration layer; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// Chat-completion endpoint URL
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Model name sent to the endpoint
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Environment variable holding the API key
    #[arg(long, global = true)]
    pub credential_env: Option<String>,
    /// Sampling temperature
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Maximum output tokens per backend call
    #[arg(long, global = true)]
    pub max_tokens: Option<u32>,
    /// Trailing turns echoed into each section prompt
    #[arg(long, global = true)]
    pub carry_over_turns: Option<usize>,
    /// Token budget of the system context
    #[arg(long, global = true)]
    pub context_budget: Option<usize>,
    /// Knowledge chunks retrieved per prompt
    #[arg(long, global = true)]
    pub retrieval_k: Option<usize>,
    /// Approximate tokens per knowledge chunk
    #[arg(long, global = true)]
    pub chunk_tokens: Option<usize>,
    /// HTTP timeout in seconds
    #[arg(long, global = true)]
    pub timeout_secs: Option<u64>,
    /// Directory holding manifest.json and the knowledge files
    #[arg(long, global = true)]
    pub knowledge_dir: Option<PathBuf>,
    /// Directory for generated scripts and logs
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Grammaticality scorer name
    #[arg(long, global = true)]
    pub scorer: Option<String>,
    #[arg(skip)]
    pub weights: Option<MetricWeights>,
}

impl ConfigLayer {
    pub fn from_toml(raw: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(raw)?)
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::from_toml(&raw).with_context(|| format!("parsing config file {}", path.display()))
    }

    /// Reads `ELICIT_<FIELD>` variables through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        fn parsed<T: std::str::FromStr>(
            lookup: &impl Fn(&str) -> Option<String>,
            key: &str,
        ) -> anyhow::Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            match lookup(key) {
                None => Ok(None),
                Some(v) => v
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|e| anyhow::anyhow!("{key}={v:?}: {e}")),
            }
        }
        let l = &lookup;
        Ok(Self {
            endpoint: l("ELICIT_ENDPOINT"),
            model: l("ELICIT_MODEL"),
            credential_env: l("ELICIT_CREDENTIAL_ENV"),
            temperature: parsed(l, "ELICIT_TEMPERATURE")?,
            max_tokens: parsed(l, "ELICIT_MAX_TOKENS")?,
            carry_over_turns: parsed(l, "ELICIT_CARRY_OVER_TURNS")?,
            context_budget: parsed(l, "ELICIT_CONTEXT_BUDGET")?,
            retrieval_k: parsed(l, "ELICIT_RETRIEVAL_K")?,
            chunk_tokens: parsed(l, "ELICIT_CHUNK_TOKENS")?,
            timeout_secs: parsed(l, "ELICIT_TIMEOUT_SECS")?,
            knowledge_dir: l("ELICIT_KNOWLEDGE_DIR").map(PathBuf::from),
            output_dir: l("ELICIT_OUTPUT_DIR").map(PathBuf::from),
            scorer: l("ELICIT_SCORER"),
            weights: None,
        })
    }

    fn apply(self, cfg: &mut AppConfig) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(
            endpoint,
            model,
            credential_env,
            temperature,
            max_tokens,
            carry_over_turns,
            context_budget,
            retrieval_k,
            chunk_tokens,
            timeout_secs,
            knowledge_dir,
            output_dir,
            scorer,
            weights
        );
    }
}

impl AppConfig {
    /// Applies `file`, then `env`, then `flags` over the defaults.
    pub fn resolve(file: ConfigLayer, env: ConfigLayer, flags: ConfigLayer) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        for layer in [file, env, flags] {
            layer.apply(&mut cfg);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            bail!("temperature must be positive, got {}", self.temperature);
        }
        for (name, v) in [
            ("max_tokens", self.max_tokens as usize),
            ("carry_over_turns", self.carry_over_turns),
            ("context_budget", self.context_budget),
            ("retrieval_k", self.retrieval_k),
            ("chunk_tokens", self.chunk_tokens),
            ("timeout_secs", self.timeout_secs as usize),
        ] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if !self.weights.is_valid() {
            bail!("metric weights must be non-negative with a positive sum");
        }
        if self.endpoint.trim().is_empty() || self.model.trim().is_empty() {
            bail!("endpoint and model must be set");
        }
        Ok(())
    }

    pub fn require_knowledge_dir(&self) -> anyhow::Result<&Path> {
        if !self.knowledge_dir.is_dir() {
            bail!(
                "knowledge directory {} does not exist (set knowledge_dir or --knowledge-dir)",
                self.knowledge_dir.display()
            );
        }
        Ok(&self.knowledge_dir)
    }
}

/// Config file to read: the explicit path, else `$ELICIT_CONFIG`, else
/// `./elicit.toml` when present. An explicit path must exist.
pub fn locate_config_file(
    explicit: Option<&Path>,
    lookup: impl Fn(&str) -> Option<String>,
) -> anyhow::Result<Option<PathBuf>> {
    if let Some(p) = explicit {
        if !p.is_file() {
            bail!("config file {} not found", p.display());
        }
        return Ok(Some(p.to_path_buf()));
    }
    if let Some(p) = lookup(CONFIG_ENV) {
        let p = PathBuf::from(p);
        if !p.is_file() {
            bail!("config file {} (from {CONFIG_ENV}) not found", p.display());
        }
        return Ok(Some(p));
    }
    let default = PathBuf::from(DEFAULT_CONFIG_FILE);
    Ok(default.is_file().then_some(default))
}
