//! `evaluate`: per-(treatment, response) qini/AUUC on the test split, with
//! curve exports.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hmum_core::data::{Instance, ResponseKind};
use hmum_core::hum::{infer_batch, HumModel};
use hmum_core::metrics::{auuc, auuc_continuous, export_curve, qini, qini_continuous, MetricReport};

use crate::config::RunConfig;
use crate::pipeline::prepare;

pub struct EvaluateSummary {
    pub reports: Vec<MetricReport>,
    pub report_path: PathBuf,
}

/// Ranking scores for treatment `k` over an evaluation set: the model's own
/// counterfactual pair for that branch, `y_hat^k - y_hat^{0,k}`.
pub fn branch_uplift_scores(model: &HumModel, instances: &[Instance], k: usize) -> Result<Vec<f64>> {
    let xs: Vec<&[usize]> = instances.iter().map(|i| i.x.as_slice()).collect();
    let estimates = infer_batch(model, &xs)?;
    Ok(estimates
        .iter()
        .map(|e| e.treated[k - 1] - e.control[k - 1])
        .collect())
}

/// One evaluation cell: treatment `k` against the shared control group on
/// the model's response.
pub fn evaluate_cell(
    model: &HumModel,
    test: &[Instance],
    k: usize,
) -> Result<(MetricReport, hmum_core::metrics::UpliftCurve, hmum_core::metrics::UpliftCurve)> {
    let subset: Vec<Instance> = test
        .iter()
        .filter(|i| i.t == 0 || i.t == k)
        .cloned()
        .collect();
    if subset.is_empty() {
        bail!("no instances with treatment 0 or {k} in the evaluation set");
    }
    let scores = branch_uplift_scores(model, &subset, k)?;
    let treated: Vec<bool> = subset.iter().map(|i| i.t == k).collect();
    let labels: Vec<f64> = subset.iter().map(|i| i.y[model.response]).collect();
    let ((qini_curve, qini_coeff), (auuc_curve, auuc_coeff)) = match model.response_kind {
        ResponseKind::Binary => (
            qini(&scores, &treated, &labels)?,
            auuc(&scores, &treated, &labels)?,
        ),
        ResponseKind::Continuous => (
            qini_continuous(&scores, &treated, &labels)?,
            auuc_continuous(&scores, &treated, &labels)?,
        ),
    };
    let n_treated = treated.iter().filter(|&&t| t).count();
    Ok((
        MetricReport {
            treatment: k,
            response: model.response_name.clone(),
            qini: qini_coeff,
            auuc: auuc_coeff,
            n_treated,
            n_control: subset.len() - n_treated,
        },
        qini_curve,
        auuc_curve,
    ))
}

pub fn load_checkpoints(dir: &Path, responses: usize) -> Result<Vec<HumModel>> {
    (0..responses)
        .map(|r| {
            let path = dir.join(format!("hum_r{}.json", r + 1));
            HumModel::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))
        })
        .collect()
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint_dir: &Path) -> Result<EvaluateSummary> {
    cfg.write_resolved()?;
    let data = prepare(cfg)?;
    let responses = data.schema.num_responses();
    let models = load_checkpoints(checkpoint_dir, responses)?;
    let schema_hash = data.schema.hash();
    for model in &models {
        if model.schema_hash != schema_hash {
            bail!(
                "checkpoint for `{}` was trained against a different schema (hash {} vs {})",
                model.response_name,
                model.schema_hash,
                schema_hash
            );
        }
    }

    let mut reports = Vec::new();
    for model in &models {
        for k in 1..=data.schema.treatments {
            let (report, qini_curve, auuc_curve) = evaluate_cell(model, &data.test, k)?;
            export_curve(
                &qini_curve,
                &cfg.out.join(format!("qini_t{k}_{}.csv", model.response_name)),
            )?;
            export_curve(
                &auuc_curve,
                &cfg.out.join(format!("auuc_t{k}_{}.csv", model.response_name)),
            )?;
            log::info!(
                "treatment {k} on {}: qini {:.4}, auuc {:.4}",
                model.response_name,
                report.qini,
                report.auuc
            );
            reports.push(report);
        }
    }
    let report_path = cfg.out.join("metrics.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&reports)?)?;
    Ok(EvaluateSummary { reports, report_path })
}
