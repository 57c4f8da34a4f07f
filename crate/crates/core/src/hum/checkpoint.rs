//! Self-describing JSON checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ResponseKind;
use crate::hum::model::{build_layout, HumConfig, HumModel};
use crate::hum::HumError;
use crate::nn::ParamStore;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    schema_hash: String,
    response: usize,
    response_name: String,
    response_kind: ResponseKind,
    treatments: usize,
    cardinalities: Vec<usize>,
    config: HumConfig,
    label_mean: f64,
    label_std: f64,
    params: ParamStore,
}

impl HumModel {
    pub fn save(&self, path: &Path) -> Result<(), HumError> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            schema_hash: self.schema_hash.clone(),
            response: self.response,
            response_name: self.response_name.clone(),
            response_kind: self.response_kind,
            treatments: self.treatments,
            cardinalities: self.cardinalities.clone(),
            config: self.config.clone(),
            label_mean: self.label_mean,
            label_std: self.label_std,
            params: self.store().clone(),
        };
        let out = File::create(path).map_err(|e| HumError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::to_writer(BufWriter::new(out), &file)
            .map_err(|e| HumError::Checkpoint(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HumError> {
        let file = File::open(path).map_err(|e| HumError::Checkpoint(format!("{}: {e}", path.display())))?;
        let parsed: CheckpointFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| HumError::Checkpoint(format!("{}: {e}", path.display())))?;
        if parsed.version != CHECKPOINT_VERSION {
            return Err(HumError::Checkpoint(format!(
                "version mismatch: file has {}, expected {CHECKPOINT_VERSION}",
                parsed.version
            )));
        }
        // Rebuild the architecture deterministically, then overlay the
        // stored values; any structural drift surfaces as a shape mismatch.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (expected_store, feature_tables, treatment_table, branches) = build_layout(
            &parsed.cardinalities,
            parsed.treatments,
            parsed.response_kind,
            &parsed.config,
            &mut rng,
        );
        if expected_store.len() != parsed.params.len() {
            return Err(HumError::Checkpoint(format!(
                "parameter count mismatch: file has {}, layout expects {}",
                parsed.params.len(),
                expected_store.len()
            )));
        }
        for ((_, expected), (_, stored)) in expected_store.iter().zip(parsed.params.iter()) {
            if expected.name != stored.name
                || expected.rows != stored.rows
                || expected.cols != stored.cols
            {
                return Err(HumError::Checkpoint(format!(
                    "parameter `{}` ({}x{}) does not match layout slot `{}` ({}x{})",
                    stored.name, stored.rows, stored.cols, expected.name, expected.rows, expected.cols
                )));
            }
        }
        let mut params = parsed.params;
        params.ensure_grad_buffers();
        params.check_finite().map_err(|e| HumError::Checkpoint(e.to_string()))?;
        Ok(HumModel {
            response: parsed.response,
            response_name: parsed.response_name,
            response_kind: parsed.response_kind,
            schema_hash: parsed.schema_hash,
            cardinalities: parsed.cardinalities,
            treatments: parsed.treatments,
            config: parsed.config,
            label_mean: parsed.label_mean,
            label_std: parsed.label_std,
            store: params,
            feature_tables,
            treatment_table,
            branches,
        })
    }
}
