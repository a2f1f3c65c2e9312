//! Run manifests: the command, the effective config as flat dotted keys,
//! and SHA-256 digests of every input and output file.
//!
//! A manifest is written before the command does any work and rewritten
//! when it finishes, so a failed run still leaves one behind.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::config::flatten;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Run {
    command: &'static str,
    out: PathBuf,
    config: Table,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(command: &'static str, out: &Path, config: Table) -> CliResult<Run> {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::new("io", format!("creating {}: {e}", out.display())))?;
        let run = Run {
            command,
            out: out.to_path_buf(),
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        };
        run.write_manifest("running", None)?;
        Ok(run)
    }

    /// Reads an input file, recording its digest.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::new("io", format!("reading {}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Opens an output file under the run directory.
    pub fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| CliError::new("io", format!("creating {}: {e}", path.display())))?;
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(BufWriter::new(f))
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let mut w = self.create(name)?;
        w.write_all(bytes)?;
        w.flush()?;
        Ok(())
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn finish(self, outcome: &CliResult<()>) -> CliResult<()> {
        match outcome {
            Ok(()) => self.write_manifest("ok", None),
            Err(e) => self.write_manifest("error", Some(e)),
        }
    }

    fn write_manifest(&self, status: &str, error: Option<&CliError>) -> CliResult<()> {
        let mut head = Table::new();
        head.insert("command".into(), Value::String(self.command.into()));
        head.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        head.insert("status".into(), Value::String(status.into()));
        let mut text = toml::to_string(&head).map_err(|e| CliError::new("io", e.to_string()))?;

        text.push_str("\n[config]\n");
        for (k, v) in flatten(&self.config) {
            text.push_str(&format!("{k} = {v}\n"));
        }

        let mut digests = Table::new();
        let inputs: Table = self.inputs.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        digests.insert("inputs".into(), Value::Table(inputs));
        let mut outputs = Table::new();
        for name in &self.outputs {
            let bytes = std::fs::read(self.out.join(name))?;
            outputs.insert(name.clone(), Value::String(sha256_hex(&bytes)));
        }
        digests.insert("outputs".into(), Value::Table(outputs));
        if let Some(e) = error {
            let mut t = Table::new();
            t.insert("kind".into(), Value::String(e.kind.clone()));
            t.insert("message".into(), Value::String(e.message.clone()));
            digests.insert("error".into(), Value::Table(t));
        }
        text.push('\n');
        text.push_str(&toml::to_string(&digests).map_err(|e| CliError::new("io", e.to_string()))?);
        std::fs::write(self.out.join(MANIFEST), text)?;
        Ok(())
    }
}
