//! Experiment configuration files.
//!
//! A config is a TOML document with a `[grid]` table (environment) and a
//! `[train]` table (learning hyperparameters). Every key is optional and
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::GridConfig;
use crate::marl::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.train.validate()
    }

    /// SHA-256 of the canonical (sorted-key JSON) form of the fully resolved config.
    pub fn hash(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        let canonical = serde_json::to_string(&value)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
