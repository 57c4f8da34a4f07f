//! `simulate`: replay synthetic requests through the weight model and the
//! score store, enable treatments with the threshold rule, and score every
//! policy against the generator's stored ground truth.
//!
//! Realized outcome per user is the value-weighted sum of true responses
//! under the enabled set; multiple enabled treatments add their true effects
//! (the simulator's composition assumption — the decision rule itself never
//! relies on it). Policy weights in the report come from the exposure log,
//! never from model outputs.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hmum_core::data::generate_synthetic_rct;
use hmum_core::ddm::{
    decide, proportion_label, value_weights, DecisionMode, ScoreStore, WeightModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::requests::read_requests_jsonl;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub name: String,
    pub total_weighted_outcome: f64,
    pub mean_weighted_outcome: f64,
    /// Mean true effect added per response, relative to all-off.
    pub per_response_effect: Vec<f64>,
    pub users: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyReport {
    pub sigma: f64,
    pub skipped_requests: usize,
    pub policies: Vec<PolicyOutcome>,
}

impl PolicyReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyOutcome> {
        self.policies.iter().find(|p| p.name == name)
    }
}

pub fn cmd_simulate(
    cfg: &RunConfig,
    store_path: &Path,
    weight_model_path: &Path,
    requests_path: &Path,
) -> Result<PolicyReport> {
    cfg.write_resolved()?;
    if cfg.data.is_some() {
        bail!("simulate evaluates policies against generator ground truth; it needs a generator-backed config");
    }
    let store = ScoreStore::load(store_path)?;
    let weight_model =
        WeightModel::load(weight_model_path).with_context(|| format!("loading {}", weight_model_path.display()))?;
    let requests = read_requests_jsonl(requests_path)?;
    let world = generate_synthetic_rct(&cfg.synthetic_config())?;
    let truth_index: HashMap<&str, usize> = world
        .raw
        .iter()
        .enumerate()
        .map(|(i, row)| (row.user_id.as_str(), i))
        .collect();

    let k_total = world.schema.treatments;
    let r_total = world.schema.num_responses();
    let mode = if cfg.top1 { DecisionMode::TopOne } else { DecisionMode::AllPassing };

    let mut policy_names: Vec<String> = vec!["hmum".into()];
    policy_names.extend((1..=k_total).map(|k| format!("all_on_t{k}")));
    policy_names.push("both_on".into());
    policy_names.push("all_off".into());
    policy_names.push("random".into());

    let mut totals = vec![0.0f64; policy_names.len()];
    let mut effects = vec![vec![0.0f64; r_total]; policy_names.len()];
    let mut users = 0usize;
    let mut skipped = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(7000));

    let decisions_path = cfg.out.join("decisions.csv");
    let mut decisions = std::io::BufWriter::new(
        std::fs::File::create(&decisions_path)
            .with_context(|| format!("creating {}", decisions_path.display()))?,
    );
    writeln!(decisions, "user_id,k,phi,enabled")?;

    for request in &requests {
        // Random policy draws are consumed per request regardless of skips,
        // so the stream stays aligned and deterministic.
        let coin_flips: Vec<bool> = (0..k_total).map(|_| rng.gen_bool(0.5)).collect();

        let Some(&truth_i) = truth_index.get(request.user_id.as_str()) else {
            skipped += 1;
            continue;
        };
        let Some(w_true) = proportion_label(&request.exposures, r_total) else {
            skipped += 1;
            continue;
        };
        let Some(delta) = store.delta_matrix(&request.user_id) else {
            skipped += 1;
            continue;
        };

        let raw_scores = weight_model.weight_forward(request)?;
        let w_model = value_weights(&raw_scores);
        let phi = hmum_core::ddm::comprehensive_scores(&w_model, delta)?;
        let enabled = decide(&w_model, delta, cfg.sigma, mode)?;
        for k in 1..=k_total {
            writeln!(
                decisions,
                "{},{},{},{}",
                request.user_id,
                k,
                phi[k - 1],
                enabled.contains(&k)
            )?;
        }

        let realized = |enabled_set: &[usize]| -> (f64, Vec<f64>) {
            let mut outcome = 0.0;
            let mut effect = vec![0.0; r_total];
            for r in 0..r_total {
                let mut y = world.truth.mu(truth_i, r);
                for &k in enabled_set {
                    y += world.truth.tau(truth_i, k, r);
                    effect[r] += world.truth.tau(truth_i, k, r);
                }
                outcome += w_true[r] * y;
            }
            (outcome, effect)
        };

        let all: Vec<usize> = (1..=k_total).collect();
        let random_set: Vec<usize> = (1..=k_total).filter(|k| coin_flips[k - 1]).collect();
        let mut policy_sets: Vec<Vec<usize>> = vec![enabled];
        policy_sets.extend((1..=k_total).map(|k| vec![k]));
        policy_sets.push(all);
        policy_sets.push(Vec::new());
        policy_sets.push(random_set);

        for (p, set) in policy_sets.iter().enumerate() {
            let (outcome, effect) = realized(set);
            totals[p] += outcome;
            for r in 0..r_total {
                effects[p][r] += effect[r];
            }
        }
        users += 1;
    }
    decisions.flush()?;

    if users == 0 {
        bail!("no simulatable requests (all {skipped} skipped)");
    }
    let policies = policy_names
        .into_iter()
        .enumerate()
        .map(|(p, name)| PolicyOutcome {
            name,
            total_weighted_outcome: totals[p],
            mean_weighted_outcome: totals[p] / users as f64,
            per_response_effect: effects[p].iter().map(|e| e / users as f64).collect(),
            users,
        })
        .collect();
    let report = PolicyReport {
        sigma: cfg.sigma,
        skipped_requests: skipped,
        policies,
    };
    let report_path = report_file(cfg);
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    log::info!(
        "simulated {} users ({} skipped), report at {}",
        users,
        skipped,
        report_path.display()
    );
    Ok(report)
}

pub fn report_file(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("policy_report.json")
}
