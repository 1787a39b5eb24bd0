use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::prompt::TEMPLATE_VERSION;
use crate::util::git_blob_hash;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub frames_described: usize,
    pub generation_requests: usize,
    pub generation_backend_calls: usize,
    pub generation_cache_hits: usize,
    pub frames_embedded: usize,
}

/// Record of one command invocation, written as `manifest.<command>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub template_version: String,
    /// Git-style blob hashes (sha256 over `blob <len>\0<content>`).
    pub inputs: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
    pub counters: Counters,
}

impl Manifest {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        Self {
            command: command.to_owned(),
            status: "running".into(),
            failed_stage: None,
            error: None,
            config: cfg.to_map(),
            config_hash: cfg.content_hash(),
            template_version: TEMPLATE_VERSION.to_owned(),
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            counters: Counters::default(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(path.display().to_string(), git_blob_hash(&bytes));
        Ok(())
    }

    pub fn record_artifact(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.artifacts.insert(name.to_owned(), git_blob_hash(&bytes));
        Ok(())
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest.{command}.json")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
