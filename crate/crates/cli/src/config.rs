//! TOML configuration file. Every key is optional; unknown keys are
//! rejected. Command-line flags override file values.
//!
//! ```toml
//! [run]
//! dataset = "ring"
//! method = "disene-fc"
//! out_dim = 32
//! [run.loss]
//! lambda_ent = 1.0
//! epochs = 50
//! [run.walk]
//! walk_length = 20
//! [bench]
//! dims = [8, 32]
//! seeds = [0, 1, 2]
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use disene::experiment::{BenchSuite, Method, RunConfig};
use disene::synth::SynthKind;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub run: RunConfig,
    pub bench: BenchGrid,
    /// Set when the file names `run.out_dim` explicitly.
    #[serde(skip)]
    pub explicit_dim: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchGrid {
    pub datasets: Vec<SynthKind>,
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for BenchGrid {
    fn default() -> Self {
        let s = BenchSuite::default();
        BenchGrid {
            datasets: s.datasets,
            methods: s.methods,
            dims: s.dims,
            seeds: s.seeds,
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let raw: toml::Table = toml::from_str(&text)?;
    cfg.explicit_dim = raw
        .get("run")
        .and_then(|r| r.as_table())
        .is_some_and(|r| r.contains_key("out_dim"));
    Ok(cfg)
}
