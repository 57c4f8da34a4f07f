//! Joint training loss: masked squared error plus the control-path gate
//! consistency term.
//!
//! A treated instance (`t = k != 0`) flows only through branch `k`'s treated
//! tower. A control instance flows through every branch's control path and
//! additionally pays, per branch, the KL divergence between that branch's
//! control gate distribution and the elementwise mean of all branches'
//! control gates. Masking is structural: paths a sub-batch does not use are
//! never built, so their gradients are exactly zero.

use crate::data::Instance;
use crate::hum::model::{BranchPath, HumModel};
use crate::hum::HumError;
use crate::nn::{Graph, NodeId};

/// Builds the loss over a batch; returns the scalar node.
pub(crate) fn build_loss(
    model: &HumModel,
    graph: &mut Graph,
    batch: &[&Instance],
) -> Result<NodeId, HumError> {
    if batch.is_empty() {
        return Err(HumError::EmptyBatch);
    }
    let k_total = model.treatments;
    for inst in batch {
        if inst.t > k_total {
            return Err(HumError::Input(format!(
                "instance `{}` has treatment {} outside [0, {k_total}]",
                inst.user_id, inst.t
            )));
        }
        if inst.y.len() <= model.response {
            return Err(HumError::Input(format!(
                "instance `{}` lacks response {}",
                inst.user_id, model.response
            )));
        }
    }

    let mut groups: Vec<Vec<&Instance>> = vec![Vec::new(); k_total + 1];
    for inst in batch {
        groups[inst.t].push(inst);
    }

    let mut terms: Vec<NodeId> = Vec::new();

    // Treated sub-batches: branch k's treated tower only.
    for k in 1..=k_total {
        let group = &groups[k];
        if group.is_empty() {
            continue;
        }
        let xs: Vec<&[usize]> = group.iter().map(|inst| inst.x.as_slice()).collect();
        let labels: Vec<f64> = group
            .iter()
            .map(|inst| model.standardize(inst.y[model.response]))
            .collect();
        let feats = model.feature_nodes(graph, &xs)?;
        let nodes = model.branch_nodes(graph, &feats, group.len(), k, BranchPath::Treated)?;
        let sq = graph.sq_err(nodes.y_hat, &labels)?;
        terms.push(graph.sum_all(sq));
    }

    // Control sub-batch: every branch's control path plus the KL term.
    let control = &groups[0];
    if !control.is_empty() {
        let xs: Vec<&[usize]> = control.iter().map(|inst| inst.x.as_slice()).collect();
        let labels: Vec<f64> = control
            .iter()
            .map(|inst| model.standardize(inst.y[model.response]))
            .collect();
        let feats = model.feature_nodes(graph, &xs)?;
        let mut gates = Vec::with_capacity(k_total);
        for k in 1..=k_total {
            let nodes = model.branch_nodes(graph, &feats, control.len(), k, BranchPath::Control)?;
            let sq = graph.sq_err(nodes.y_hat, &labels)?;
            terms.push(graph.sum_all(sq));
            gates.push(nodes.gate);
        }
        let mean_gate = graph.mean_of(&gates)?;
        let target = if model.config.kl_stop_gradient {
            graph.stop_grad(mean_gate)
        } else {
            mean_gate
        };
        for z in gates {
            let kl = graph.kl_rows(z, target)?;
            let sum = graph.sum_all(kl);
            terms.push(graph.scale(sum, model.config.lambda_kl));
        }
    }

    let total = graph.add_n(&terms)?;
    Ok(graph.scale(total, 1.0 / batch.len() as f64))
}

/// Loss value over a batch (in the model's label-standardized space; a fresh
/// model has identity standardization).
pub fn hum_loss(model: &HumModel, batch: &[Instance]) -> Result<f64, HumError> {
    let refs: Vec<&Instance> = batch.iter().collect();
    let mut graph = Graph::new();
    let loss = build_loss(model, &mut graph, &refs)?;
    Ok(graph.scalar_value(loss)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetSchema, FeatureKind, FeatureSpec, ResponseKind, ResponseSpec};
    use crate::hum::model::HumConfig;
    use crate::nn::kl_divergence;
    use approx::assert_relative_eq;

    fn schema(treatments: usize) -> DatasetSchema {
        DatasetSchema {
            features: (0..3)
                .map(|j| FeatureSpec {
                    name: format!("f{j}"),
                    kind: FeatureKind::Categorical { cardinality: 4 },
                })
                .collect(),
            treatments,
            responses: vec![ResponseSpec {
                name: "resp".into(),
                kind: ResponseKind::Continuous,
            }],
        }
    }

    fn config() -> HumConfig {
        HumConfig {
            embed_dim: 4,
            experts: 2,
            expert_hidden: 6,
            tower_hidden: 5,
            ..Default::default()
        }
    }

    fn inst(id: &str, x: [usize; 3], t: usize, y: f64) -> Instance {
        Instance {
            user_id: id.into(),
            x: x.to_vec(),
            t,
            y: vec![y],
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let model = HumModel::new(&schema(2), 0, config(), 1).unwrap();
        assert!(matches!(hum_loss(&model, &[]), Err(HumError::EmptyBatch)));
    }

    #[test]
    fn single_branch_control_reduces_to_mse() {
        // K = 1: the KL target is the gate itself, so the loss is the plain
        // squared error of the control tower.
        let model = HumModel::new(&schema(1), 0, config(), 7).unwrap();
        let instance = inst("u0", [1, 2, 3], 0, 0.4);
        let loss = hum_loss(&model, std::slice::from_ref(&instance)).unwrap();
        let (_, y_hat) = model.branch_forward(&instance.x, 1, BranchPath::Control).unwrap();
        assert_relative_eq!(loss, (0.4 - y_hat) * (0.4 - y_hat), epsilon = 1e-12);
    }

    #[test]
    fn treated_instance_ignores_other_branches() {
        // Perturbing branch 2's parameters must not change the loss of a
        // batch that only contains branch-1 treated instances.
        let mut model = HumModel::new(&schema(2), 0, config(), 7).unwrap();
        let batch = vec![inst("u0", [1, 2, 3], 1, 0.9), inst("u1", [0, 0, 1], 1, -0.2)];
        let before = hum_loss(&model, &batch).unwrap();
        let gate_w = model.branches[1].gate_w;
        let tower_w = model.branches[1].treated_tower.layers[0].0;
        for id in [gate_w, tower_w] {
            for v in &mut model.store_mut().get_mut(id).values {
                *v += 10.0;
            }
        }
        let after = hum_loss(&model, &batch).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn masked_tower_gradient_is_exactly_zero() {
        let mut model = HumModel::new(&schema(2), 0, config(), 3).unwrap();
        let batch = vec![inst("u0", [1, 2, 3], 1, 0.5), inst("u1", [2, 0, 1], 0, 0.1)];
        let refs: Vec<&Instance> = batch.iter().collect();
        let mut graph = Graph::new();
        let loss = build_loss(&model, &mut graph, &refs).unwrap();
        model.store_mut().zero_grads();
        graph.backward(loss, model.store_mut()).unwrap();
        // branch 2 treated tower saw no data in this batch
        let masked = model.branches[1].treated_tower.layers[0].0;
        assert!(model.store().get(masked).grad.iter().all(|&g| g == 0.0));
        // branch 1 treated tower did see data
        let active = model.branches[0].treated_tower.layers[0].0;
        assert!(model.store().get(active).grad.iter().any(|&g| g != 0.0));
        // control towers of both branches saw the control instance
        for b in 0..2 {
            let control = model.branches[b].control_tower.layers[0].0;
            assert!(model.store().get(control).grad.iter().any(|&g| g != 0.0));
        }
    }

    #[test]
    fn two_instance_hand_batch_matches_expanded_expression() {
        // One treated (t=1) and one control instance, K=2: the loss must be
        // the hand-assembled sum of per-path squared errors plus the two KL
        // terms against the mean gate, divided by the batch size.
        let model = HumModel::new(&schema(2), 0, config(), 11).unwrap();
        let treated = inst("u0", [1, 2, 3], 1, 0.7);
        let control = inst("u1", [3, 1, 0], 0, -0.3);

        let (_, y1) = model.branch_forward(&treated.x, 1, BranchPath::Treated).unwrap();
        let (g1, y01) = model.branch_forward(&control.x, 1, BranchPath::Control).unwrap();
        let (g2, y02) = model.branch_forward(&control.x, 2, BranchPath::Control).unwrap();
        let mean_gate: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| (a + b) / 2.0).collect();
        let expected = ((0.7 - y1).powi(2)
            + (-0.3 - y01).powi(2)
            + (-0.3 - y02).powi(2)
            + kl_divergence(&g1, &mean_gate).unwrap()
            + kl_divergence(&g2, &mean_gate).unwrap())
            / 2.0;

        let loss = hum_loss(&model, &[treated, control]).unwrap();
        assert_relative_eq!(loss, expected, epsilon = 1e-12);
    }

    #[test]
    fn kl_term_is_nonnegative() {
        // lambda = 0 strips the KL term; the full loss is never below the
        // lambda = 0 loss on control-only batches.
        let schema2 = schema(2);
        let with_kl = HumModel::new(&schema2, 0, config(), 13).unwrap();
        let mut cfg0 = config();
        cfg0.lambda_kl = 0.0;
        let without_kl = HumModel::new(&schema2, 0, cfg0, 13).unwrap();
        let batch = vec![inst("u0", [1, 1, 1], 0, 0.2), inst("u1", [2, 3, 0], 0, 0.4)];
        let a = hum_loss(&with_kl, &batch).unwrap();
        let b = hum_loss(&without_kl, &batch).unwrap();
        assert!(a >= b - 1e-15);
    }
}
