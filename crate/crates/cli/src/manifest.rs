//! Output files and the run manifest.
//!
//! Every run writes its artifacts plus `manifest.toml`, which records the
//! full effective scenario, its SHA-256, the seed, the tool version and a
//! SHA-256 per artifact. Feeding the `[config]` table back in as a scenario
//! reproduces the run.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{to_toml, Scenario};
use crate::{CliError, Command};

/// In-memory artifacts of one run, written in insertion order.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub notes: Vec<String>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_owned(), bytes));
    }

    /// Captures the output of a writer-based serialiser.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> squidpulse::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    subcommand: &'a str,
    seed: u64,
    version: &'a str,
    config_sha256: String,
    notes: &'a [String],
    files: Vec<FileEntry>,
    config: &'a Scenario,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write(
    dir: &Path,
    cmd: Command,
    scenario: &Scenario,
    artifacts: Artifacts,
) -> Result<(), CliError> {
    let io =
        |e: std::io::Error| CliError::Config(format!("cannot write to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut files = Vec::with_capacity(artifacts.files.len());
    for (name, bytes) in &artifacts.files {
        std::fs::write(dir.join(name), bytes).map_err(io)?;
        files.push(FileEntry {
            path: name.clone(),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = Manifest {
        name: &scenario.name,
        subcommand: cmd.name(),
        seed: scenario.seed,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(to_toml(scenario).as_bytes()),
        notes: &artifacts.notes,
        files,
        config: scenario,
    };
    let text =
        toml::to_string(&manifest).map_err(|e| CliError::Numeric(format!("manifest: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text).map_err(io)?;
    Ok(())
}

/// Seed of the named sub-stream of `root`.
pub fn substream(root: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
