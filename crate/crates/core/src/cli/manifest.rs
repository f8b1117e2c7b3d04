use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::algorithm::TrainConfig;
use crate::envs::EnvId;
use crate::error::{Error, Result};

/// Written next to the metrics; enough to rerun the same training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub env: EnvId,
    pub seeds: Vec<u64>,
    pub config: TrainConfig,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            artifact_version: env!("CARGO_PKG_VERSION").to_owned(),
            env: config.env,
            seeds: vec![config.seed],
            config: config.clone(),
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::config("manifest", e.to_string()))?;
        manifest.config.validate()?;
        Ok(manifest)
    }
}
