pub mod analyze;
pub mod fetch;
pub mod generate;
pub mod lint;
pub mod rubric;
pub mod score;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use elicit_core::transcript::{
    normalize_transcript, parse_script, Script, ScriptFormat, SpeakerAliases,
};
use serde::Serialize;

use crate::status::{fail, CmdResult, ExitStatus, WithStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// `.json` files are structured, everything else plain
    Auto,
    Plain,
    Structured,
}

impl InputFormat {
    fn resolve(self, path: &Path) -> ScriptFormat {
        match self {
            Self::Plain => ScriptFormat::Plain,
            Self::Structured => ScriptFormat::Structured,
            Self::Auto => match path.extension().and_then(|e| e.to_str()) {
                Some(ext) if ext.eq_ignore_ascii_case("json") => ScriptFormat::Structured,
                _ => ScriptFormat::Plain,
            },
        }
    }
}

/// Reads one script. Plain files pass through speaker-alias normalization.
/// A script without an `id` takes the file stem.
pub fn load_script(path: &Path, format: InputFormat, aliases: &SpeakerAliases) -> CmdResult<Script> {
    let raw = fs::read_to_string(path)
        .map_err(anyhow::Error::from)
        .map_err(|e| e.context(format!("{}: cannot read", path.display())))
        .status(ExitStatus::Validation)?;
    let format = format.resolve(path);
    let text = match format {
        ScriptFormat::Plain => normalize_transcript(&raw, aliases),
        ScriptFormat::Structured => raw,
    };
    let script = match parse_script(&text, format) {
        Ok(s) => s,
        Err(e) => {
            let at = e.line().map_or_else(String::new, |l| format!(":{l}"));
            return fail(ExitStatus::Validation, format!("{}{at}: {e}", path.display()));
        }
    };
    if script.id().is_empty() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "script".into());
        return Ok(script.with_id(stem));
    }
    Ok(script)
}

/// Loads every path and rejects duplicate script ids.
pub fn load_scripts(
    paths: &[PathBuf],
    format: InputFormat,
    aliases: &SpeakerAliases,
) -> CmdResult<Vec<Script>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let s = load_script(p, format, aliases)?;
        if !seen.insert(s.id().to_string()) {
            return fail(
                ExitStatus::Validation,
                format!("{}: script id `{}` appears twice in the input", p.display(), s.id()),
            );
        }
        out.push(s);
    }
    Ok(out)
}

pub fn parse_aliases(pairs: &[String]) -> CmdResult<SpeakerAliases> {
    let mut aliases = SpeakerAliases::new();
    for p in pairs {
        aliases.parse_pair(p).status(ExitStatus::Config)?;
    }
    Ok(aliases)
}

pub fn print_json<T: Serialize>(value: &T) -> CmdResult {
    let s = serde_json::to_string_pretty(value).status(ExitStatus::Validation)?;
    outln!("{s}");
    Ok(())
}
