use std::collections::BTreeMap;
use std::path::Path;

use causticwave::io::fmt;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash of the inputs this stage depends on.
    pub hash: String,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

impl StageRecord {
    pub fn new(hash: String) -> Self {
        Self {
            hash,
            ..Self::default()
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), round9(value));
    }
}

/// Run record written to `manifest.json` after every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn new(config: &PipelineConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            stages: BTreeMap::new(),
        }
    }

    /// Previous manifest in `dir`, re-targeted at `config`. Stage records
    /// keep their own input hashes, so stale ones are simply not reused.
    pub fn load_or_new(dir: &Path, config: &PipelineConfig) -> Self {
        let fresh = Self::new(config);
        let Ok(text) = std::fs::read_to_string(dir.join("manifest.json")) else {
            return fresh;
        };
        match serde_json::from_str::<Manifest>(&text) {
            Ok(old) => Self {
                stages: old.stages,
                ..fresh
            },
            Err(_) => fresh,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Json {
            path: path.display().to_string(),
            source: e,
        })?;
        causticwave::io::write_text(&path, &(text + "\n")).map_err(|e| CliError::io(&path, e))
    }
}

/// `v` rounded to nine significant digits.
pub fn round9(v: f64) -> f64 {
    fmt(v).parse().unwrap_or(v)
}
