//! Reproducibility record written next to separation outputs.

use crate::error::Result;
use crate::model::ModelConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub preset: String,
    pub config: ModelConfig,
    pub seed: Option<u64>,
    pub weights_file: Option<String>,
    pub input: String,
    pub prompts: Vec<String>,
    pub chunk_s: Option<f64>,
    pub overlap: Option<f64>,
    pub streaming: bool,
    pub precision: String,
    pub outputs: Vec<String>,
    /// analytic MAC estimate for this run's duration and prompt count
    pub mac_estimate: u64,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}
