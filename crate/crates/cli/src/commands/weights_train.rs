//! `weights-train`: fit the value-weight model on a request log.

use std::path::{Path, PathBuf};

use anyhow::Result;
use hmum_core::ddm::{train_weight_model, WeightModel, WeightModelConfig, WeightTrainConfig};

use crate::config::RunConfig;
use crate::requests::{read_request_schema, read_requests_jsonl};

pub struct WeightsSummary {
    pub model_path: PathBuf,
    pub trained_on: usize,
    pub skipped: usize,
}

pub fn cmd_weights_train(cfg: &RunConfig, requests_path: &Path, schema_path: &Path) -> Result<WeightsSummary> {
    cfg.write_resolved()?;
    let schema = read_request_schema(schema_path)?;
    let requests = read_requests_jsonl(requests_path)?;
    let mut model = WeightModel::new(
        schema,
        WeightModelConfig {
            embed_dim: cfg.weight_embed_dim,
            experts: cfg.weight_experts,
            hidden: cfg.weight_hidden,
        },
        cfg.seed.wrapping_add(3000),
    )?;
    let report = train_weight_model(
        &mut model,
        &requests,
        &WeightTrainConfig {
            batch_size: cfg.weight_batch_size,
            learning_rate: cfg.learning_rate,
            plateau_patience: cfg.plateau_patience,
            plateau_factor: cfg.plateau_factor,
            max_epochs: cfg.weight_max_epochs,
            seed: cfg.seed.wrapping_add(4000),
        },
    )?;
    let model_path = cfg.out.join("weight_model.json");
    model.save(&model_path)?;
    log::info!(
        "weight model trained on {} requests ({} skipped), final loss {:.6}",
        requests.len() - report.skipped_requests,
        report.skipped_requests,
        report.train_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(WeightsSummary {
        model_path,
        trained_on: requests.len() - report.skipped_requests,
        skipped: report.skipped_requests,
    })
}
