use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Everything needed to audit or repeat one stage. Timestamps and latencies
/// live here and nowhere else, so data files stay byte-identical across runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub args: BTreeMap<String, String>,
    pub config: RunConfig,
    /// Input path to sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output path (relative to the output directory) to sha256.
    pub outputs: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
    #[serde(default)]
    pub latency_ms: BTreeMap<String, u64>,
}

/// Tracks what a stage reads and writes, then writes the manifest.
pub struct Stage {
    root: PathBuf,
    manifest: RunManifest,
}

impl Stage {
    pub fn begin(config: &RunConfig, stage: &str, args: BTreeMap<String, String>) -> Self {
        Self {
            root: config.output_dir.clone(),
            manifest: RunManifest {
                tool: "povsent".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                stage: stage.into(),
                args,
                config: config.clone(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                started_at: now(),
                finished_at: String::new(),
                status: "running".into(),
                latency_ms: BTreeMap::new(),
            },
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Digest of an input read by other code.
    pub fn note_input(&mut self, path: &Path) -> CliResult<()> {
        self.read(path).map(|_| ())
    }

    /// Reads and parses a JSON file written by an earlier stage.
    pub fn read_json<T: serde::de::DeserializeOwned>(&mut self, rel: &str) -> CliResult<T> {
        let path = self.root.join(rel);
        if !path.is_file() {
            return Err(CliError::Config(format!(
                "missing {} (run the stage that produces it first)",
                path.display()
            )));
        }
        let bytes = self.read(&path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.insert(rel.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    pub fn write_csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        self.write(rel, &bytes)
    }

    pub fn record_latency(&mut self, key: String, ms: u64) {
        self.manifest.latency_ms.insert(key, ms);
    }

    /// Writes `manifests/<name>.json` with the given status.
    pub fn finish(mut self, name: &str, status: &str) -> CliResult<PathBuf> {
        self.manifest.finished_at = now();
        self.manifest.status = status.into();
        let path = self.root.join("manifests").join(format!("{name}.json"));
        fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| CliError::Config(e.to_string()))?;
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).map_err(|e| CliError::Config(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
