//! `score`: batch counterfactual inference over all users into the score
//! store, refreshed atomically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use hmum_core::ddm::{aggregate_control, relative_uplift, write_score_store, ScoreRecord};
use hmum_core::hum::infer_batch;

use crate::commands::evaluate::load_checkpoints;
use crate::config::RunConfig;
use crate::pipeline::prepare;

pub struct ScoreSummary {
    pub store_path: PathBuf,
    pub users: usize,
    pub skipped: usize,
}

pub fn cmd_score(cfg: &RunConfig, checkpoint_dir: &Path) -> Result<ScoreSummary> {
    cfg.write_resolved()?;
    let data = prepare(cfg)?;
    let responses = data.schema.num_responses();
    let models = load_checkpoints(checkpoint_dir, responses)?;
    let schema_hash = data.schema.hash();
    for model in &models {
        if model.schema_hash != schema_hash {
            bail!(
                "checkpoint for `{}` was trained against a different schema",
                model.response_name
            );
        }
    }

    // Deduplicate users deterministically (the same user id must not appear
    // twice in the store).
    let mut users: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for inst in data.all_instances() {
        users.entry(inst.user_id).or_insert(inst.x);
    }
    let ids: Vec<String> = users.keys().cloned().collect();
    let xs: Vec<&[usize]> = users.values().map(|x| x.as_slice()).collect();

    let mut records = Vec::with_capacity(ids.len() * responses * data.schema.treatments);
    let mut skipped = 0usize;
    // One inference pass per response model, then assemble per user.
    let mut per_model = Vec::with_capacity(models.len());
    for model in &models {
        per_model.push(infer_batch(model, &xs)?);
    }
    'users: for (i, user_id) in ids.iter().enumerate() {
        let mut user_records = Vec::with_capacity(responses * data.schema.treatments);
        for (r, estimates) in per_model.iter().enumerate() {
            let est = &estimates[i];
            let control_star = aggregate_control(&est.control)?;
            for k in 1..=data.schema.treatments {
                match relative_uplift(user_id, est.treated[k - 1], control_star) {
                    Ok(delta) => user_records.push(ScoreRecord {
                        user_id: user_id.clone(),
                        response: r + 1,
                        treatment: k,
                        y_treated: est.treated[k - 1],
                        y_control_star: control_star,
                        delta,
                    }),
                    Err(e) => {
                        log::warn!("skipping user `{user_id}`: {e}");
                        skipped += 1;
                        continue 'users;
                    }
                }
            }
        }
        records.extend(user_records);
    }

    let store_path = cfg.out.join("score_store.csv");
    write_score_store(&store_path, &records)?;
    log::info!(
        "scored {} users ({} skipped) into {}",
        ids.len() - skipped,
        skipped,
        store_path.display()
    );
    Ok(ScoreSummary {
        store_path,
        users: ids.len() - skipped,
        skipped,
    })
}
