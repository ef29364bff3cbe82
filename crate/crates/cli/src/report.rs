//! Output directory handling: CSV tables, JSON reports and metadata sidecars.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    file: &'a str,
    config_sha256: &'a str,
    tool_version: &'a str,
    seed: u64,
    wall_time_s: f64,
}

/// Collects the files of one command run and writes sidecars on `finish`.
pub struct Report {
    dir: PathBuf,
    command: String,
    config_hash: String,
    seed: u64,
    started: Instant,
    files: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Report {
    pub fn new(dir: &Path, command: &str, canonical_config: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_hash: sha256_hex(canonical_config),
            seed,
            started: Instant::now(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` as CSV with the given header and pre-formatted rows.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Registers a file written by other means.
    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Writes `<file>.meta.json` next to every output.
    pub fn finish(self) -> Result<Vec<PathBuf>> {
        let wall = self.started.elapsed().as_secs_f64();
        let mut out = Vec::new();
        for f in &self.files {
            let meta = Sidecar {
                command: &self.command,
                file: f,
                config_sha256: &self.config_hash,
                tool_version: VERSION,
                seed: self.seed,
                wall_time_s: wall,
            };
            let path = self.dir.join(format!("{f}.meta.json"));
            fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
            out.push(self.dir.join(f));
        }
        Ok(out)
    }
}

/// Shortest round-trip formatting, stable across runs.
pub fn num(x: f64) -> String {
    format!("{x}")
}
