//! Run directories, manifests and input digests.
//!
//! `manifest.json` holds only values determined by the inputs and resolved
//! config, so reproducible runs write identical bytes. Wall-time goes to the
//! `timing.json` sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Common;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TaskFailure {
    pub id: String,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranker: Option<serde_json::Value>,
    pub inputs: Vec<InputDigest>,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
    pub failures: Vec<TaskFailure>,
    pub warnings: Vec<String>,
    pub timing: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: impl Serialize) -> anyhow::Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config)?,
            ranker: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
            failures: Vec::new(),
            warnings: Vec::new(),
            timing: TIMING_FILE.to_string(),
        })
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn digest(role: &str, path: &Path) -> anyhow::Result<InputDigest> {
    Ok(InputDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// Output directory of one command invocation.
pub struct RunDir {
    pub path: PathBuf,
    started: Instant,
    outputs: Vec<String>,
}

impl RunDir {
    /// Use `common.run_dir` if given, otherwise a fresh
    /// `<out>/<UTC timestamp>-seed<seed>` directory.
    pub fn create(common: &Common) -> anyhow::Result<Self> {
        let path = match &common.run_dir {
            Some(dir) => dir.clone(),
            None => {
                let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
                let base = common.out.join(format!("{stamp}-seed{}", common.seed));
                let mut path = base.clone();
                let mut k = 2;
                while path.exists() {
                    path = PathBuf::from(format!("{}-{k}", base.display()));
                    k += 1;
                }
                path
            }
        };
        fs::create_dir_all(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(RunDir {
            path,
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.file(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// One JSON value per line.
    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut buf, &row)?;
            buf.write_all(b"\n")?;
        }
        self.write_bytes(name, &buf)
    }

    /// Write the manifest and the timing sidecar.
    pub fn finish(mut self, mut manifest: RunManifest) -> anyhow::Result<PathBuf> {
        manifest.outputs = std::mem::take(&mut self.outputs);
        let elapsed = self.started.elapsed().as_secs_f64();
        self.write_json(MANIFEST_FILE, &manifest)?;
        self.write_json(TIMING_FILE, &serde_json::json!({ "wall_time_secs": elapsed }))?;
        Ok(self.path)
    }
}
