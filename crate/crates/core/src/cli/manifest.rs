use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::CliResult;
use crate::dataio::KvRecord;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.txt";

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Provenance record of one command, written as `key = value` lines when the
/// run starts and rewritten when it finishes.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command_line: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Fully resolved settings, defaults included.
    pub config: KvRecord,
    pub inputs: Vec<(String, PathBuf)>,
    pub outputs: Vec<(String, PathBuf)>,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub status: String,
}

impl RunManifest {
    pub fn start(command_line: &str, seed: Option<u64>, config: KvRecord) -> Self {
        Self {
            command_line: command_line.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: None,
            status: "running".to_string(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.push((name.to_string(), path.to_path_buf()));
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.outputs.push((name.to_string(), path.to_path_buf()));
    }

    pub fn finish(&mut self, status: &str) {
        self.finished_unix = Some(unix_now());
        self.status = status.to_string();
    }

    pub fn to_record(&self) -> KvRecord {
        let mut rec = KvRecord::new();
        rec.set("command", &self.command_line);
        rec.set("version", &self.version);
        if let Some(seed) = self.seed {
            rec.set("seed", seed);
        }
        rec.set("status", &self.status);
        rec.set("started_unix", format!("{:.3}", self.started_unix));
        if let Some(t) = self.finished_unix {
            rec.set("finished_unix", format!("{t:.3}"));
        }
        for (k, v) in self.config.entries() {
            rec.set(format!("config.{k}"), v);
        }
        for (k, p) in &self.inputs {
            rec.set(format!("input.{k}"), p.display());
        }
        for (k, p) in &self.outputs {
            rec.set(format!("output.{k}"), p.display());
        }
        rec
    }

    /// Record the outcome of the run and rewrite the manifest.
    pub fn conclude<T>(&mut self, path: &Path, outcome: CliResult<T>) -> CliResult<T> {
        match &outcome {
            Ok(_) => self.finish("complete"),
            Err(e) => self.finish(&format!("failed: {e}")),
        }
        let written = self.write(path);
        let value = outcome?;
        written?;
        Ok(value)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_record().write(path)
    }
}
