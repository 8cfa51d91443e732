//! Stage output directories, run manifests and the output-directory lock.
//!
//! Each stage writes into `<out_dir>/<stage>/`. `manifest.json` there lists
//! the config snapshot, input and output digests and per-stage counts; it
//! is fully determined by the inputs. Wall-clock timings and other
//! run-dependent numbers go to `timings.json` beside it.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use urgentcare_core::sha256_hex;

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path, label: String) -> std::io::Result<Self> {
        let data = fs::read(path)?;
        Ok(Self { path: label, sha256: sha256_hex(&data), bytes: data.len() as u64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the stage directory.
    pub outputs: Vec<FileDigest>,
    pub counts: BTreeMap<String, Value>,
}

pub fn write_json_pretty(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Collects one stage's outputs and writes its manifest last.
pub struct StageDir {
    pub stage: &'static str,
    pub dir: PathBuf,
    outputs: Vec<String>,
    inputs: Vec<FileDigest>,
    pub counts: BTreeMap<String, Value>,
    started: Instant,
    started_unix_ms: u128,
    phases: Vec<(String, f64)>,
    pub run_stats: BTreeMap<String, Value>,
}

impl StageDir {
    /// Creates `<out_dir>/<stage>` after removing any previous manifest, so
    /// an interrupted stage never looks complete.
    pub fn create(out_dir: &Path, stage: &'static str) -> Result<Self, CliError> {
        let dir = out_dir.join(stage);
        fs::create_dir_all(&dir).map_err(|e| io_err(stage, &dir, e))?;
        let manifest = dir.join(MANIFEST_FILE);
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(|e| io_err(stage, &manifest, e))?;
        }
        Ok(Self {
            stage,
            dir,
            outputs: Vec::new(),
            inputs: Vec::new(),
            counts: BTreeMap::new(),
            started: Instant::now(),
            started_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
            phases: Vec::new(),
            run_stats: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let d = FileDigest::of(path, path.display().to_string()).map_err(|e| io_err(self.stage, path, e))?;
        self.inputs.push(d);
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        write_atomic(&path, bytes).map_err(|e| io_err(self.stage, &path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Records a file some other writer already placed in the stage directory.
    pub fn adopt(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::failure(self.stage, e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// JSON-lines, one compact value per line.
    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, values: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        for v in values {
            serde_json::to_writer(&mut bytes, &v).map_err(|e| CliError::failure(self.stage, e.to_string()))?;
            bytes.push(b'\n');
        }
        self.write(name, &bytes)
    }

    pub fn count(&mut self, key: &str, value: impl Serialize) {
        self.counts.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn phase(&mut self, name: &str, since: Instant) {
        self.phases.push((name.to_string(), since.elapsed().as_secs_f64() * 1e3));
    }

    pub fn finish(mut self, config: &RunConfig) -> Result<RunManifest, CliError> {
        self.outputs.sort();
        let outputs = self
            .outputs
            .iter()
            .map(|name| FileDigest::of(&self.dir.join(name), name.clone()))
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| io_err(self.stage, &self.dir, e))?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            stage: self.stage.to_string(),
            seed: config.seed,
            config: config.clone(),
            inputs: self.inputs.clone(),
            outputs,
            counts: self.counts.clone(),
        };
        let timings = serde_json::json!({
            "stage": self.stage,
            "started_unix_ms": self.started_unix_ms,
            "elapsed_ms": self.started.elapsed().as_secs_f64() * 1e3,
            "phases_ms": self.phases.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect::<serde_json::Map<_, _>>(),
            "run": self.run_stats,
        });
        let t = self.path(TIMINGS_FILE);
        write_json_pretty(&t, &timings).map_err(|e| io_err(self.stage, &t, e))?;
        let m = self.path(MANIFEST_FILE);
        write_json_pretty(&m, &manifest).map_err(|e| io_err(self.stage, &m, e))?;
        Ok(manifest)
    }
}

pub fn io_err(stage: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::failure(stage, format!("{}: {e}", path.display()))
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir).map_err(|e| io_err("lock", out_dir, e))?;
        let path = out_dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::usage(
                "lock",
                format!("{} is held by another run; delete it if that run is gone", path.display()),
            )),
            Err(e) => Err(io_err("lock", &path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
