use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, Run};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchSettings {
    pub out: PathBuf,
    pub url: String,
    /// Downloads are stored here under the SHA-256 of their URL.
    pub cache_dir: PathBuf,
    /// Output file name; defaults to the URL's last path segment.
    pub name: Option<String>,
}

impl Default for FetchSettings {
    fn default() -> Self {
        FetchSettings {
            out: "data".into(),
            url: String::new(),
            cache_dir: ".cache/underreport".into(),
            name: None,
        }
    }
}

settings_out!(FetchSettings);

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("fetch", file, sets, flags, execute)
}

fn file_name(url: &str) -> String {
    let url = url.split(['?', '#']).next().unwrap_or_default();
    let after_scheme = url.split_once("://").map_or(url, |(_, rest)| rest);
    let path = after_scheme.split_once('/').map_or("", |(_, path)| path);
    path.rsplit('/')
        .find(|s| !s.is_empty())
        .unwrap_or("download")
        .to_string()
}

fn download(url: &str) -> CliResult<Vec<u8>> {
    let response = ureq::get(url)
        .call()
        .map_err(|e| CliError::new("network", format!("{url}: {e}")))?;
    let mut bytes = Vec::new();
    response
        .into_body()
        .into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| CliError::new("network", format!("{url}: {e}")))?;
    Ok(bytes)
}

fn execute(s: &FetchSettings, run: &mut Run) -> CliResult<()> {
    if s.url.is_empty() {
        return Err(CliError::config("`url` is required"));
    }
    let cached = s.cache_dir.join(sha256_hex(s.url.as_bytes()));
    let bytes = if cached.exists() {
        run.read(&cached)?
    } else {
        let bytes = download(&s.url)?;
        std::fs::create_dir_all(&s.cache_dir)?;
        let partial = cached.with_extension("part");
        std::fs::write(&partial, &bytes)?;
        std::fs::rename(&partial, &cached)?;
        bytes
    };
    let name = s.name.clone().unwrap_or_else(|| file_name(&s.url));
    run.write_bytes(&name, &bytes)
}
