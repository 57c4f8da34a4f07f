//! Run configuration: defaults, JSON loading, and the resolved-config
//! artifact every command writes next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSettings {
    pub n: usize,
    pub treatments: usize,
    pub responses: usize,
    pub noise_sd: f64,
    pub bins: usize,
}

impl Default for GenSettings {
    fn default() -> Self {
        Self {
            n: 100_000,
            treatments: 2,
            responses: 2,
            noise_sd: 0.5,
            bins: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,

    /// Dataset CSV; when absent the synthetic generator is the source.
    pub data: Option<PathBuf>,
    /// Schema JSON, required with `data`.
    pub schema: Option<PathBuf>,
    /// Optional separate test file (biased-training / randomized-test
    /// layouts); boundaries always come from the training portion.
    pub test_data: Option<PathBuf>,
    pub gen: GenSettings,
    pub split: [f64; 3],

    pub embed_dim: usize,
    pub experts: usize,
    pub expert_hidden: usize,
    pub tower_hidden: usize,
    pub lambda_kl: f64,
    pub kl_stop_gradient: bool,

    /// Explicit batch size; unset resolves to 4096, or 1024 when the
    /// generator is the data source.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub max_epochs: usize,

    pub sigma: f64,
    pub top1: bool,
    pub weight_embed_dim: usize,
    pub weight_experts: usize,
    pub weight_hidden: usize,
    pub weight_batch_size: usize,
    pub weight_max_epochs: usize,
    pub videos_per_request: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            data: None,
            schema: None,
            test_data: None,
            gen: GenSettings::default(),
            split: [0.8, 0.1, 0.1],
            embed_dim: 32,
            experts: 4,
            expert_hidden: 64,
            tower_hidden: 64,
            lambda_kl: 1.0,
            kl_stop_gradient: false,
            batch_size: None,
            learning_rate: 0.001,
            plateau_factor: 0.6,
            plateau_patience: 2,
            max_epochs: 20,
            sigma: 0.0,
            top1: false,
            weight_embed_dim: 16,
            weight_experts: 3,
            weight_hidden: 32,
            weight_batch_size: 256,
            weight_max_epochs: 10,
            videos_per_request: 20,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn uses_generator(&self) -> bool {
        self.data.is_none()
    }

    pub fn resolved_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(if self.uses_generator() { 1024 } else { 4096 })
    }

    pub fn hum_config(&self) -> hmum_core::hum::HumConfig {
        hmum_core::hum::HumConfig {
            embed_dim: self.embed_dim,
            experts: self.experts,
            expert_hidden: self.expert_hidden,
            tower_hidden: self.tower_hidden,
            lambda_kl: self.lambda_kl,
            kl_stop_gradient: self.kl_stop_gradient,
        }
    }

    pub fn train_config(&self, response: usize) -> hmum_core::hum::TrainConfig {
        hmum_core::hum::TrainConfig {
            batch_size: self.resolved_batch_size(),
            learning_rate: self.learning_rate,
            plateau_patience: self.plateau_patience,
            plateau_factor: self.plateau_factor,
            max_epochs: self.max_epochs,
            seed: self.seed.wrapping_add(2000 + response as u64),
        }
    }

    pub fn model_seed(&self, response: usize) -> u64 {
        self.seed.wrapping_add(1000 + response as u64)
    }

    pub fn synthetic_config(&self) -> hmum_core::data::SyntheticConfig {
        hmum_core::data::SyntheticConfig {
            n: self.gen.n,
            treatments: self.gen.treatments,
            responses: self.gen.responses,
            seed: self.seed,
            noise_sd: self.gen.noise_sd,
            bins: self.gen.bins,
        }
    }

    /// Writes the fully resolved configuration (explicit batch size
    /// included) into the output directory.
    pub fn write_resolved(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let mut resolved = self.clone();
        resolved.batch_size = Some(self.resolved_batch_size());
        let path = self.out.join("resolved_config.json");
        fs::write(&path, serde_json::to_string_pretty(&resolved)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.embed_dim, 32);
        assert_eq!(cfg.learning_rate, 0.001);
        assert_eq!(cfg.plateau_factor, 0.6);
        assert_eq!(cfg.plateau_patience, 2);
        assert_eq!(cfg.sigma, 0.0);
        assert_eq!(cfg.split, [0.8, 0.1, 0.1]);
        // 4096 for file-backed data, 1024 desk-scale generator default
        let mut file_backed = cfg.clone();
        file_backed.data = Some(PathBuf::from("x.csv"));
        assert_eq!(file_backed.resolved_batch_size(), 4096);
        assert_eq!(cfg.resolved_batch_size(), 1024);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let parsed: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.embed_dim, cfg.embed_dim);
        assert_eq!(parsed.gen.n, cfg.gen.n);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>("{\"not_a_setting\": 1}");
        assert!(err.is_err());
    }
}
