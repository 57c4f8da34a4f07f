//! The hybrid uplift model: per-treatment branches over shared embeddings.
//!
//! Each branch `k` owns a target-attention feature selector (softmax over
//! feature embeddings driven by the treatment embedding), a gate over `M`
//! expert networks, and two scalar towers: one for the treated path and one
//! for the control path. The control path of branch `k` reuses the branch's
//! attention and gate parameters with the control (`t = 0`) treatment
//! embedding, which is what ties the branches together for joint training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSchema, ResponseKind};
use crate::hum::HumError;
use crate::nn::{Activation, Graph, NodeId, ParamId, ParamStore};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumConfig {
    /// Embedding size `d` for both feature and treatment tables.
    pub embed_dim: usize,
    /// Number of experts `M` per branch.
    pub experts: usize,
    pub expert_hidden: usize,
    pub tower_hidden: usize,
    /// Weight of the control-path gate-consistency term.
    pub lambda_kl: f64,
    /// Treat the branch-mean gate distribution as a constant per step
    /// instead of letting gradients flow through it.
    pub kl_stop_gradient: bool,
}

impl Default for HumConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            experts: 4,
            expert_hidden: 64,
            tower_hidden: 64,
            lambda_kl: 1.0,
            kl_stop_gradient: false,
        }
    }
}

/// Which tower of a branch produces the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchPath {
    Treated,
    Control,
}

/// (weight, bias, activation) stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct MlpIds {
    pub layers: Vec<(ParamId, ParamId, ActivationTag)>,
}

/// Serializable activation marker (the nn enum stays plain).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum ActivationTag {
    Linear,
    Relu,
    Sigmoid,
}

impl From<ActivationTag> for Activation {
    fn from(tag: ActivationTag) -> Self {
        match tag {
            ActivationTag::Linear => Activation::Linear,
            ActivationTag::Relu => Activation::Relu,
            ActivationTag::Sigmoid => Activation::Sigmoid,
        }
    }
}

impl MlpIds {
    pub(crate) fn forward(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        mut x: NodeId,
    ) -> Result<NodeId, HumError> {
        for (w, b, act) in &self.layers {
            let wn = graph.param(store, *w);
            let bn = graph.param(store, *b);
            x = graph.dense(x, wn, bn, (*act).into())?;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct BranchParams {
    pub attention_w: ParamId,
    pub attention_b: ParamId,
    pub gate_w: ParamId,
    pub gate_b: ParamId,
    pub experts: Vec<MlpIds>,
    pub treated_tower: MlpIds,
    pub control_tower: MlpIds,
}

/// Forward nodes of one branch for one sub-batch.
pub(crate) struct BranchNodes {
    pub attention: NodeId,
    pub gate: NodeId,
    pub y_hat: NodeId,
}

#[derive(Debug, Clone)]
pub struct HumModel {
    pub response: usize,
    pub response_name: String,
    pub response_kind: ResponseKind,
    pub schema_hash: String,
    pub cardinalities: Vec<usize>,
    pub treatments: usize,
    pub config: HumConfig,
    /// Label standardization fitted on the training split (identity for
    /// binary responses). Predictions are reported in raw label units.
    pub label_mean: f64,
    pub label_std: f64,
    pub(crate) store: ParamStore,
    pub(crate) feature_tables: Vec<ParamId>,
    pub(crate) treatment_table: ParamId,
    pub(crate) branches: Vec<BranchParams>,
}

impl HumModel {
    pub fn new(
        schema: &DatasetSchema,
        response: usize,
        config: HumConfig,
        seed: u64,
    ) -> Result<Self, HumError> {
        schema.validate().map_err(|e| HumError::Input(e.to_string()))?;
        if response >= schema.num_responses() {
            return Err(HumError::Input(format!(
                "response index {response} out of range ({} responses)",
                schema.num_responses()
            )));
        }
        let cardinalities = schema
            .cardinalities()
            .map_err(|e| HumError::Input(e.to_string()))?;
        let spec = &schema.responses[response];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (store, feature_tables, treatment_table, branches) = build_layout(
            &cardinalities,
            schema.treatments,
            spec.kind,
            &config,
            &mut rng,
        );
        Ok(Self {
            response,
            response_name: spec.name.clone(),
            response_kind: spec.kind,
            schema_hash: schema.hash(),
            cardinalities,
            treatments: schema.treatments,
            config,
            label_mean: 0.0,
            label_std: 1.0,
            store,
            feature_tables,
            treatment_table,
            branches,
        })
    }

    pub fn num_features(&self) -> usize {
        self.cardinalities.len()
    }

    pub(crate) fn check_branch(&self, branch: usize) -> Result<(), HumError> {
        if branch == 0 || branch > self.treatments {
            return Err(HumError::InvalidBranch {
                branch,
                treatments: self.treatments,
            });
        }
        Ok(())
    }

    fn check_features(&self, x: &[usize]) -> Result<(), HumError> {
        if x.len() != self.num_features() {
            return Err(HumError::Input(format!(
                "expected {} feature ids, got {}",
                self.num_features(),
                x.len()
            )));
        }
        for (j, (&id, &card)) in x.iter().zip(&self.cardinalities).enumerate() {
            if id >= card {
                return Err(HumError::Input(format!(
                    "feature {j}: id {id} outside cardinality {card}"
                )));
            }
        }
        Ok(())
    }

    /// Per-feature embedding nodes (`B x d` each) for a sub-batch.
    pub(crate) fn feature_nodes(
        &self,
        graph: &mut Graph,
        xs: &[&[usize]],
    ) -> Result<Vec<NodeId>, HumError> {
        let mut nodes = Vec::with_capacity(self.num_features());
        for (j, &table) in self.feature_tables.iter().enumerate() {
            let ids: Vec<usize> = xs.iter().map(|x| x[j]).collect();
            let tn = graph.param(&self.store, table);
            nodes.push(graph.gather(tn, &ids)?);
        }
        Ok(nodes)
    }

    /// Builds one branch path over a sub-batch whose feature nodes are given.
    pub(crate) fn branch_nodes(
        &self,
        graph: &mut Graph,
        feature_nodes: &[NodeId],
        rows: usize,
        branch: usize,
        path: BranchPath,
    ) -> Result<BranchNodes, HumError> {
        self.check_branch(branch)?;
        let params = &self.branches[branch - 1];
        let t_id = match path {
            BranchPath::Treated => branch,
            BranchPath::Control => 0,
        };
        let t_table = graph.param(&self.store, self.treatment_table);
        let e_t = graph.gather(t_table, &vec![t_id; rows])?;

        let att_w = graph.param(&self.store, params.attention_w);
        let att_b = graph.param(&self.store, params.attention_b);
        let att_logits = graph.dense(e_t, att_w, att_b, Activation::Linear)?;
        let attention = graph.softmax_rows(att_logits)?;
        let selected = graph.mix(attention, feature_nodes)?;
        let fused = graph.concat_cols(selected, e_t)?;

        let gate_w = graph.param(&self.store, params.gate_w);
        let gate_b = graph.param(&self.store, params.gate_b);
        let gate_logits = graph.dense(fused, gate_w, gate_b, Activation::Linear)?;
        let gate = graph.softmax_rows(gate_logits)?;

        let expert_outs = params
            .experts
            .iter()
            .map(|e| e.forward(graph, &self.store, fused))
            .collect::<Result<Vec<_>, _>>()?;
        let mixture = graph.mix(gate, &expert_outs)?;

        let tower = match path {
            BranchPath::Treated => &params.treated_tower,
            BranchPath::Control => &params.control_tower,
        };
        let y_hat = tower.forward(graph, &self.store, mixture)?;
        Ok(BranchNodes { attention, gate, y_hat })
    }

    /// Attention weights and the selected (attention-pooled) feature
    /// embedding for one instance under branch `branch`. The control path
    /// uses the branch's own attention parameters with the `t = 0` embedding.
    pub fn feature_select(
        &self,
        x: &[usize],
        branch: usize,
        path: BranchPath,
    ) -> Result<(Vec<f64>, Vec<f64>), HumError> {
        self.check_features(x)?;
        let mut graph = Graph::new();
        let feats = self.feature_nodes(&mut graph, &[x])?;
        let nodes = self.branch_nodes(&mut graph, &feats, 1, branch, path)?;
        let attention = graph.value(nodes.attention).row(0).to_vec();
        // recompute the pooled embedding from the returned attention is the
        // caller's business; here we read the graph's own mix output
        let selected = {
            let mut acc = vec![0.0; self.config.embed_dim];
            for (j, feat) in feats.iter().enumerate() {
                let row = graph.value(*feat).row(0);
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += attention[j] * v;
                }
            }
            acc
        };
        Ok((attention, selected))
    }

    /// Gate distribution and prediction (raw label units) for one instance.
    pub fn branch_forward(
        &self,
        x: &[usize],
        branch: usize,
        path: BranchPath,
    ) -> Result<(Vec<f64>, f64), HumError> {
        self.check_features(x)?;
        let mut graph = Graph::new();
        let feats = self.feature_nodes(&mut graph, &[x])?;
        let nodes = self.branch_nodes(&mut graph, &feats, 1, branch, path)?;
        let gate = graph.value(nodes.gate).row(0).to_vec();
        let y_std = graph.value(nodes.y_hat).at(0, 0);
        Ok((gate, self.destandardize(y_std)))
    }

    pub(crate) fn standardize(&self, y: f64) -> f64 {
        (y - self.label_mean) / self.label_std
    }

    pub(crate) fn destandardize(&self, y: f64) -> f64 {
        y * self.label_std + self.label_mean
    }

    pub(crate) fn set_label_stats(&mut self, labels: &[f64]) {
        if matches!(self.response_kind, ResponseKind::Binary) || labels.is_empty() {
            self.label_mean = 0.0;
            self.label_std = 1.0;
            return;
        }
        let n = labels.len() as f64;
        let mean = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        self.label_mean = mean;
        self.label_std = if std > 1e-12 { std } else { 1.0 };
    }

    pub(crate) fn store(&self) -> &ParamStore {
        &self.store
    }

    pub(crate) fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

/// Concatenates the selected feature embedding with the treatment embedding,
/// selected embedding first.
pub fn fuse(selected: &[f64], treatment_embedding: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(selected.len() + treatment_embedding.len());
    out.extend_from_slice(selected);
    out.extend_from_slice(treatment_embedding);
    out
}

type Layout = (ParamStore, Vec<ParamId>, ParamId, Vec<BranchParams>);

pub(crate) fn build_layout(
    cardinalities: &[usize],
    treatments: usize,
    response_kind: ResponseKind,
    config: &HumConfig,
    rng: &mut ChaCha8Rng,
) -> Layout {
    let d = config.embed_dim;
    let f_x = cardinalities.len();
    let mut store = ParamStore::new();
    let feature_tables: Vec<ParamId> = cardinalities
        .iter()
        .enumerate()
        .map(|(j, &card)| store.add_embedding(format!("e_x[{j}]"), card, d, rng))
        .collect();
    let treatment_table = store.add_embedding("e_t", treatments + 1, d, rng);

    let out_act = match response_kind {
        ResponseKind::Binary => ActivationTag::Sigmoid,
        ResponseKind::Continuous => ActivationTag::Linear,
    };

    let mut branches = Vec::with_capacity(treatments);
    for k in 1..=treatments {
        let attention_w = store.add_dense_weight(format!("b{k}.att.w"), f_x, d, rng);
        let attention_b = store.add_bias(format!("b{k}.att.b"), f_x);
        let gate_w = store.add_dense_weight(format!("b{k}.gate.w"), config.experts, 2 * d, rng);
        let gate_b = store.add_bias(format!("b{k}.gate.b"), config.experts);
        let experts = (0..config.experts)
            .map(|m| MlpIds {
                layers: vec![
                    (
                        store.add_dense_weight(format!("b{k}.exp{m}.w0"), config.expert_hidden, 2 * d, rng),
                        store.add_bias(format!("b{k}.exp{m}.b0"), config.expert_hidden),
                        ActivationTag::Relu,
                    ),
                    (
                        store.add_dense_weight(
                            format!("b{k}.exp{m}.w1"),
                            config.expert_hidden,
                            config.expert_hidden,
                            rng,
                        ),
                        store.add_bias(format!("b{k}.exp{m}.b1"), config.expert_hidden),
                        ActivationTag::Relu,
                    ),
                ],
            })
            .collect();
        let mut tower = |name: &str| MlpIds {
            layers: vec![
                (
                    store.add_dense_weight(format!("b{k}.{name}.w0"), config.tower_hidden, config.expert_hidden, rng),
                    store.add_bias(format!("b{k}.{name}.b0"), config.tower_hidden),
                    ActivationTag::Relu,
                ),
                (
                    store.add_dense_weight(format!("b{k}.{name}.w1"), 1, config.tower_hidden, rng),
                    store.add_bias(format!("b{k}.{name}.b1"), 1),
                    out_act,
                ),
            ],
        };
        let treated_tower = tower("tower_t");
        let control_tower = tower("tower_c");
        branches.push(BranchParams {
            attention_w,
            attention_b,
            gate_w,
            gate_b,
            experts,
            treated_tower,
            control_tower,
        });
    }
    (store, feature_tables, treatment_table, branches)
}
