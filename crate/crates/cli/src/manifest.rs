//! Reproducibility record written alongside every report: tool version,
//! exact command line, config snapshot, input digests, wall-clock duration.

use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub duration_seconds: f64,
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub fnv1a64: String,
}

/// FNV-1a over the file bytes; enough to prove an input didn't move under
/// the report, not a security boundary.
pub fn digest_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub struct ManifestBuilder {
    started: std::time::Instant,
    command_line: Vec<String>,
    inputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command_line: &[String]) -> Self {
        Self {
            started: std::time::Instant::now(),
            command_line: command_line.to_vec(),
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Write `<target>.manifest.json`.
    pub fn write(self, target: &Path, config: serde_json::Value) -> anyhow::Result<PathBuf> {
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for path in &self.inputs {
            inputs.push(InputDigest {
                path: path.display().to_string(),
                fnv1a64: digest_file(path)?,
            });
        }
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: self.command_line,
            config,
            inputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        name.push_str(".manifest.json");
        let path = target.with_file_name(name);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}
