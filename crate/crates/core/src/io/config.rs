//! Versioned JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csv::{sha256_hex, CsvProvenance};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

pub const CONFIG_SCHEMA: &str = "bfdn-config/1";

/// Settings of the analysis subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Side of the square crop analyzed (`N = patch_size²`).
    pub patch_size: usize,
    pub eval_sigmas: Vec<f64>,
    pub bias_sigmas: Vec<f64>,
    pub svd_sigmas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Images used by sweeps (taken from the test split when available).
    pub images: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            patch_size: 40,
            eval_sigmas: (1..=10).map(|k| 10.0 * k as f64).collect(),
            bias_sigmas: (1..=10).map(|k| 10.0 * k as f64).collect(),
            svd_sigmas: vec![10.0, 25.0, 50.0, 75.0, 100.0],
            alphas: vec![0.0, 0.25, 1.0, 2.0, 7.5],
            images: 4,
        }
    }
}

/// One reproducible experiment. The top-level `seed` governs both the
/// model initialization and training; nested seeds are overwritten from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema: String,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::config(format!(
                "unsupported config schema `{}`, expected `{CONFIG_SCHEMA}`",
                cfg.schema
            )));
        }
        cfg.set_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.model.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.analysis.patch_size < 11 {
            return Err(Error::config("analysis.patch_size must be >= 11 (SSIM window)"));
        }
        Ok(())
    }

    /// Every field, defaults included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn checksum(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn provenance(&self) -> CsvProvenance {
        CsvProvenance {
            seed: self.seed,
            config_checksum: self.checksum(),
        }
    }
}
