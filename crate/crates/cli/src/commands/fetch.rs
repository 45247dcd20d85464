use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::Args;
use sha2::{Digest, Sha256};

use crate::config::AppConfig;
use crate::status::{fail, CmdResult, ExitStatus, WithStatus};

#[derive(Debug, Args)]
pub struct FetchArgs {
    pub url: String,
    /// Destination file, or a directory to save under the URL's file name
    #[arg(long)]
    pub dest: PathBuf,
    /// Expected SHA-256 of the download, hex encoded
    #[arg(long)]
    pub sha256: Option<String>,
    /// Unpack the downloaded zip archive into this directory
    #[arg(long)]
    pub extract: Option<PathBuf>,
}

fn file_name_from_url(url: &str) -> String {
    let path = url.split(['?', '#']).next().unwrap_or(url);
    path.rsplit('/')
        .find(|s| !s.is_empty() && !s.contains(':'))
        .unwrap_or("download")
        .to_string()
}

/// Streams the body into `part` while hashing it.
fn download(url: &str, part: &Path, timeout: Duration) -> anyhow::Result<String> {
    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .context("building HTTP client")?;
    let mut resp = client
        .get(url)
        .send()
        .with_context(|| format!("requesting {url}"))?
        .error_for_status()
        .with_context(|| format!("downloading {url}"))?;
    let mut out = File::create(part).with_context(|| format!("creating {}", part.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = resp.read(&mut buf).context("reading response body")?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        out.write_all(&buf[..n])?;
    }
    out.flush()?;
    Ok(hex::encode(hasher.finalize()))
}

pub fn extract_zip(archive: &Path, dir: &Path) -> anyhow::Result<usize> {
    let file = File::open(archive)?;
    let mut zip = zip::ZipArchive::new(file).context("not a zip archive")?;
    fs::create_dir_all(dir)?;
    let mut written = 0;
    for i in 0..zip.len() {
        let mut entry = zip.by_index(i)?;
        let Some(rel) = entry.enclosed_name() else {
            anyhow::bail!("archive entry `{}` escapes the target directory", entry.name());
        };
        let target = dir.join(rel);
        if entry.is_dir() {
            fs::create_dir_all(&target)?;
            continue;
        }
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        io::copy(&mut entry, &mut File::create(&target)?)?;
        written += 1;
    }
    Ok(written)
}

pub fn run(args: &FetchArgs, cfg: &AppConfig) -> CmdResult {
    let dest = if args.dest.is_dir() {
        args.dest.join(file_name_from_url(&args.url))
    } else {
        args.dest.clone()
    };
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).status(ExitStatus::Config)?;
    }
    let expected = match &args.sha256 {
        Some(h) => {
            let h = h.trim().to_ascii_lowercase();
            if h.len() != 64 || !h.chars().all(|c| c.is_ascii_hexdigit()) {
                return fail(ExitStatus::Config, format!("`{h}` is not a SHA-256 hex digest"));
            }
            Some(h)
        }
        None => None,
    };

    let mut part = dest.clone().into_os_string();
    part.push(".part");
    let part = PathBuf::from(part);
    log::info!("downloading {} to {}", args.url, part.display());
    let digest = match download(&args.url, &part, Duration::from_secs(cfg.timeout_secs)) {
        Ok(d) => d,
        Err(e) => {
            let _ = fs::remove_file(&part);
            return Err(e).status(ExitStatus::Backend);
        }
    };
    if let Some(want) = expected {
        if digest != want {
            let _ = fs::remove_file(&part);
            return fail(
                ExitStatus::Validation,
                format!("checksum mismatch for {}: expected {want}, got {digest}; download discarded", args.url),
            );
        }
    }
    fs::rename(&part, &dest).status(ExitStatus::Config)?;
    outln!("{}  {}", digest, dest.display());

    if let Some(dir) = &args.extract {
        let n = extract_zip(&dest, dir).status(ExitStatus::Validation)?;
        outln!("extracted {n} file(s) into {}", dir.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_file_names() {
        assert_eq!(file_name_from_url("https://x.org/files/S1.zip?dl=1"), "S1.zip");
        assert_eq!(file_name_from_url("https://x.org/"), "x.org");
        assert_eq!(file_name_from_url("https://"), "download");
    }
}
