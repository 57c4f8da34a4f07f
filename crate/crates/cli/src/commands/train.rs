//! `train`: one checkpoint per response channel.

use std::path::PathBuf;

use anyhow::Result;
use hmum_core::hum::{train, HumModel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::pipeline::prepare;

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub checkpoints: Vec<PathBuf>,
    pub train_losses: Vec<Vec<f64>>,
    pub val_losses: Vec<Vec<f64>>,
}

pub fn checkpoint_path(cfg: &RunConfig, response: usize) -> PathBuf {
    cfg.out.join(format!("hum_r{}.json", response + 1))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.write_resolved()?;
    let data = prepare(cfg)?;
    let responses = data.schema.num_responses();
    let mut summary = TrainSummary {
        checkpoints: Vec::with_capacity(responses),
        train_losses: Vec::with_capacity(responses),
        val_losses: Vec::with_capacity(responses),
    };
    for r in 0..responses {
        let mut model = HumModel::new(&data.schema, r, cfg.hum_config(), cfg.model_seed(r))?;
        let report = train(&mut model, &data.train, &data.val, &cfg.train_config(r))?;
        let path = checkpoint_path(cfg, r);
        model.save(&path)?;
        log::info!(
            "response {}: {} epochs, final train loss {:.6}, checkpoint {}",
            model.response_name,
            report.epochs_run,
            report.train_losses.last().copied().unwrap_or(f64::NAN),
            path.display()
        );
        summary.checkpoints.push(path);
        summary.train_losses.push(report.train_losses);
        summary.val_losses.push(report.val_losses);
    }
    std::fs::write(
        cfg.out.join("train_report.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
