//! Shared data preparation: one deterministic path from a config to encoded
//! splits, used identically by train, evaluate, and score so checkpoints and
//! data stay in agreement.

use anyhow::{bail, Context, Result};
use hmum_core::data::{
    encode_rows, fit_boundaries, generate_synthetic_rct, read_raw_csv, split, DatasetSchema,
    Instance, SyntheticRct,
};

use crate::config::RunConfig;

pub struct PreparedData {
    /// Schema with boundaries fitted on the training portion.
    pub schema: DatasetSchema,
    pub train: Vec<Instance>,
    pub val: Vec<Instance>,
    pub test: Vec<Instance>,
    /// Present when the generator was the source.
    pub synthetic: Option<SyntheticRct>,
}

impl PreparedData {
    pub fn all_instances(&self) -> Vec<Instance> {
        let mut all = self.train.clone();
        all.extend(self.val.iter().cloned());
        all.extend(self.test.iter().cloned());
        all
    }
}

/// Builds the splits. Continuous-feature boundaries are always fitted on the
/// training rows only, then applied to validation and test.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    if let Some(data_path) = &cfg.data {
        let schema_path = cfg
            .schema
            .as_ref()
            .context("--data requires --schema (or `schema` in the config)")?;
        let mut schema = DatasetSchema::from_json(
            &std::fs::read_to_string(schema_path)
                .with_context(|| format!("reading schema {}", schema_path.display()))?,
        )?;
        let rows = read_raw_csv(data_path, &schema)?;
        if let Some(test_path) = &cfg.test_data {
            // Separate randomized test file: the data file provides train
            // and validation, ratios renormalized over the first two parts.
            let test_rows = read_raw_csv(test_path, &schema)?;
            let denom = cfg.split[0] + cfg.split[1];
            if denom <= 0.0 {
                bail!("train and validation ratios must be positive");
            }
            let ratios = [cfg.split[0] / denom, cfg.split[1] / denom];
            let (train_raw, rest) = {
                let (a, b, c) = split(
                    &rows,
                    [ratios[0], ratios[1] / 2.0, ratios[1] / 2.0],
                    cfg.seed,
                )?;
                let mut val = b;
                val.extend(c);
                (a, val)
            };
            let mut schema_fitted = schema.clone();
            fit_boundaries(&train_raw, &mut schema_fitted)?;
            Ok(PreparedData {
                train: encode_rows(&train_raw, &schema_fitted)?,
                val: encode_rows(&rest, &schema_fitted)?,
                test: encode_rows(&test_rows, &schema_fitted)?,
                schema: schema_fitted,
                synthetic: None,
            })
        } else {
            let (train_raw, val_raw, test_raw) = split(&rows, cfg.split, cfg.seed)?;
            fit_boundaries(&train_raw, &mut schema)?;
            Ok(PreparedData {
                train: encode_rows(&train_raw, &schema)?,
                val: encode_rows(&val_raw, &schema)?,
                test: encode_rows(&test_raw, &schema)?,
                schema,
                synthetic: None,
            })
        }
    } else {
        let rct = generate_synthetic_rct(&cfg.synthetic_config())?;
        let (train_raw, val_raw, test_raw) = split(&rct.raw, cfg.split, cfg.seed)?;
        let mut schema = rct.schema.clone();
        // refit on the training split only, as the file pipeline would
        for f in &mut schema.features {
            if let hmum_core::data::FeatureKind::Continuous { boundaries, .. } = &mut f.kind {
                *boundaries = None;
            }
        }
        fit_boundaries(&train_raw, &mut schema)?;
        Ok(PreparedData {
            train: encode_rows(&train_raw, &schema)?,
            val: encode_rows(&val_raw, &schema)?,
            test: encode_rows(&test_raw, &schema)?,
            schema,
            synthetic: Some(rct),
        })
    }
}
