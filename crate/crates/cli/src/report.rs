//! Run reports: what was run, with which configuration, how long it took
//! and the SHA-256 of every file it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const RUN_REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub threads: usize,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    /// The fully materialized configuration that was used.
    pub config: serde_json::Value,
    pub timings_ms: BTreeMap<String, f64>,
    /// Output path (relative to the output root) to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub summary: serde_json::Value,
}

/// Collects timings and outputs while a subcommand runs.
pub struct Recorder {
    report: RunReport,
    root: PathBuf,
    files: Vec<PathBuf>,
    started: Instant,
}

impl Recorder {
    pub fn new(subcommand: &str, root: &Path, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            report: RunReport {
                schema_version: RUN_REPORT_SCHEMA_VERSION,
                tool: "dpfence".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                subcommand: subcommand.into(),
                argv: std::env::args().collect(),
                threads: rayon::current_num_threads(),
                seed: None,
                inputs: BTreeMap::new(),
                config: serde_json::to_value(config)?,
                timings_ms: BTreeMap::new(),
                outputs: BTreeMap::new(),
                summary: serde_json::Value::Null,
            },
            root: root.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn seed(&mut self, seed: u64) {
        self.report.seed = Some(seed);
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.report.inputs.insert(name.into(), path.display().to_string());
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.report.timings_ms.insert(stage.into(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn output(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn outputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(paths);
    }

    pub fn summary(&mut self, value: serde_json::Value) {
        self.report.summary = value;
    }

    /// Hashes the outputs and writes the report to `path`.
    pub fn finish(mut self, path: &Path) -> Result<RunReport> {
        for f in &self.files {
            let rel = f.strip_prefix(&self.root).unwrap_or(f).to_string_lossy().replace('\\', "/");
            let hash = dpfence::hashing::sha256_file(f).with_context(|| format!("hashing {}", f.display()))?;
            self.report.outputs.insert(rel, hash);
        }
        self.report.timings_ms.insert("total".into(), self.started.elapsed().as_secs_f64() * 1e3);
        let mut text = serde_json::to_string_pretty(&self.report)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.report)
    }
}

/// Every regular file under `dir`, sorted.
pub fn walk_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}
