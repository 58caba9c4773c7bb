//! Run metadata written once per invocation as `manifest.toml`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use nemfilm_core::optim::Status;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub eps: f64,
    pub h: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub status: String,
    pub converged: bool,
    pub seconds: f64,
}

impl RunRecord {
    pub fn status_name(s: Status) -> String {
        match s {
            Status::GradientTolerance => "gradient-tolerance",
            Status::StepTolerance => "step-tolerance",
            Status::ValueTolerance => "value-tolerance",
            Status::MaxIterations => "max-iterations",
            Status::LineSearchFailed => "line-search-failed",
        }
        .to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub verb: String,
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub threads: usize,
    pub seconds: f64,
    pub results: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub runs: Vec<RunRecord>,
}

impl Manifest {
    pub fn new(verb: &str, scenario: &str, config_sha256: &str, seed: u64, threads: usize) -> Self {
        Manifest {
            verb: verb.to_string(),
            scenario: scenario.to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            seconds: 0.0,
            results: BTreeMap::new(),
            flags: BTreeMap::new(),
            runs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing manifest")?;
        let path = dir.join("manifest.toml");
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}
