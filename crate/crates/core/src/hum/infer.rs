//! Counterfactual inference: treated and control estimates from every branch
//! regardless of the instance's observed treatment.

use crate::hum::model::{BranchPath, HumModel};
use crate::hum::HumError;
use crate::nn::Graph;

const INFER_CHUNK: usize = 2048;

/// Per-user outputs of one response model across all branches.
#[derive(Debug, Clone)]
pub struct UpliftEstimates {
    /// `treated[k-1]` is the branch-k prediction under treatment `k`.
    pub treated: Vec<f64>,
    /// `control[k-1]` is the branch-k prediction under the control embedding.
    pub control: Vec<f64>,
    /// Arithmetic mean of `control` (lies between its min and max).
    pub control_star: f64,
    /// Control-path gate distribution per branch.
    pub control_gates: Vec<Vec<f64>>,
}

impl UpliftEstimates {
    /// Mean absolute pairwise gap between control estimates; the statistic
    /// behind the branch-consistency comparison.
    pub fn control_gap(&self) -> f64 {
        let k = self.control.len();
        if k < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for a in 0..k {
            for b in (a + 1)..k {
                sum += (self.control[a] - self.control[b]).abs();
                count += 1;
            }
        }
        sum / count as f64
    }
}

/// Runs every branch on one instance's features.
pub fn infer_all_treatments(model: &HumModel, x: &[usize]) -> Result<UpliftEstimates, HumError> {
    let xs: [&[usize]; 1] = [x];
    Ok(infer_batch(model, &xs)?.pop().expect("one estimate"))
}

/// Batched inference; outputs depend only on features, never on the observed
/// treatment.
pub fn infer_batch(model: &HumModel, xs: &[&[usize]]) -> Result<Vec<UpliftEstimates>, HumError> {
    let k_total = model.treatments;
    let mut out: Vec<UpliftEstimates> = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(INFER_CHUNK) {
        let mut graph = Graph::new();
        let feats = model.feature_nodes(&mut graph, chunk)?;
        let mut treated_nodes = Vec::with_capacity(k_total);
        let mut control_nodes = Vec::with_capacity(k_total);
        for k in 1..=k_total {
            treated_nodes.push(model.branch_nodes(&mut graph, &feats, chunk.len(), k, BranchPath::Treated)?);
            control_nodes.push(model.branch_nodes(&mut graph, &feats, chunk.len(), k, BranchPath::Control)?);
        }
        for row in 0..chunk.len() {
            let treated: Vec<f64> = treated_nodes
                .iter()
                .map(|n| model.destandardize(graph.value(n.y_hat).at(row, 0)))
                .collect();
            let control: Vec<f64> = control_nodes
                .iter()
                .map(|n| model.destandardize(graph.value(n.y_hat).at(row, 0)))
                .collect();
            let control_gates: Vec<Vec<f64>> = control_nodes
                .iter()
                .map(|n| graph.value(n.gate).row(row).to_vec())
                .collect();
            let control_star = control.iter().sum::<f64>() / k_total as f64;
            let min = control.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = control.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(
                control_star >= min - 1e-9 && control_star <= max + 1e-9,
                "control mean {control_star} escaped [{min}, {max}]"
            );
            out.push(UpliftEstimates {
                treated,
                control,
                control_star,
                control_gates,
            });
        }
    }
    Ok(out)
}
