//! Online decision stage: control-estimate aggregation, relative uplift,
//! per-request value weights, and threshold enablement.
//!
//! Everything here is pure given a frozen weight model, so request handling
//! can fan out freely; score-store refresh is a single-writer atomic file
//! replace.

mod request;
mod store;
mod weight_model;

pub use request::{
    pool_request, proportion_label, synthetic_requests, RequestContext, RequestSchema,
    RequestSimConfig,
};
pub use store::{read_score_store, write_score_store, ScoreRecord, ScoreStore};
pub use weight_model::{
    train_weight_model, weight_gradient_check, weight_perturb_parameters, WeightModel,
    WeightModelConfig, WeightTrainConfig, WeightTrainReport,
};

use thiserror::Error;

/// Floor on the aggregated control estimate in the relative-uplift ratio.
/// Responses here are nonnegative quantities, so a near-zero control
/// estimate marks a degenerate user rather than an infinite uplift.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DdmError {
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error("no control estimates to aggregate")]
    EmptyAggregate,
    #[error("degenerate control estimate {value} for user `{user_id}`")]
    DegenerateControl { user_id: String, value: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("empty item group in request `{user_id}`")]
    EmptyGroup { user_id: String },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("score store error: {0}")]
    Store(String),
}

/// Arithmetic mean of the per-branch control estimates; sits between their
/// minimum and maximum by construction, which is asserted.
pub fn aggregate_control(estimates: &[f64]) -> Result<f64, DdmError> {
    if estimates.is_empty() {
        return Err(DdmError::EmptyAggregate);
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let min = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        mean >= min - 1e-9 && mean <= max + 1e-9,
        "mean {mean} escaped [{min}, {max}]"
    );
    Ok(mean)
}

/// Relative uplift `y_treated / y_control_star - 1`. The user id travels in
/// the error when the control estimate sits under [`DENOMINATOR_FLOOR`].
pub fn relative_uplift(user_id: &str, y_treated: f64, y_control_star: f64) -> Result<f64, DdmError> {
    if y_control_star.abs() < DENOMINATOR_FLOOR {
        return Err(DdmError::DegenerateControl {
            user_id: user_id.to_string(),
            value: y_control_star,
        });
    }
    Ok(y_treated / y_control_star - 1.0)
}

/// Proportional weights `w_r = o_r / sum(o)`, clamping negatives to zero and
/// falling back to uniform when the total mass is negligible. The output
/// always sums to one with nonnegative entries.
pub fn value_weights(outputs: &[f64]) -> Vec<f64> {
    let r = outputs.len();
    if r == 0 {
        return Vec::new();
    }
    let clamped: Vec<f64> = outputs.iter().map(|&o| o.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total < 1e-12 {
        return vec![1.0 / r as f64; r];
    }
    clamped.iter().map(|o| o / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecisionMode {
    /// Enable every treatment whose score clears the threshold.
    #[default]
    AllPassing,
    /// Enable at most the best-scoring passing treatment.
    TopOne,
}

/// Weight-blended comprehensive score per treatment:
/// `phi_k = sum_r w_r * delta[r][k-1]`.
pub fn comprehensive_scores(weights: &[f64], delta: &[Vec<f64>]) -> Result<Vec<f64>, DdmError> {
    if delta.len() != weights.len() {
        return Err(DdmError::Input(format!(
            "{} weight entries for {} delta rows",
            weights.len(),
            delta.len()
        )));
    }
    if weights.is_empty() {
        return Err(DdmError::Input("no responses".into()));
    }
    let k_total = delta[0].len();
    if delta.iter().any(|row| row.len() != k_total) {
        return Err(DdmError::Input("ragged delta matrix".into()));
    }
    let mut phi = vec![0.0; k_total];
    for (w, row) in weights.iter().zip(delta) {
        for (p, d) in phi.iter_mut().zip(row) {
            *p += w * d;
        }
    }
    Ok(phi)
}

/// Treatments (1-based) whose comprehensive score strictly exceeds the
/// threshold. Scores exactly at the threshold stay disabled.
pub fn decide(
    weights: &[f64],
    delta: &[Vec<f64>],
    sigma: f64,
    mode: DecisionMode,
) -> Result<Vec<usize>, DdmError> {
    let phi = comprehensive_scores(weights, delta)?;
    let passing: Vec<usize> = phi
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > sigma)
        .map(|(k0, _)| k0 + 1)
        .collect();
    Ok(match mode {
        DecisionMode::AllPassing => passing,
        DecisionMode::TopOne => passing
            .into_iter()
            .max_by(|&a, &b| phi[a - 1].partial_cmp(&phi[b - 1]).expect("finite scores"))
            .into_iter()
            .collect(),
    })
}
