//! Value-weight model: pooled request features through shared experts with
//! one gate and one sigmoid tower per response.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ddm::request::{proportion_label, RequestContext, RequestSchema};
use crate::ddm::DdmError;
use crate::nn::{
    finite_difference_check, plateau_update, Activation, Adam, GradCheckReport, Graph, NodeId,
    ParamId, ParamStore, PlateauSchedule,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightModelConfig {
    pub embed_dim: usize,
    pub experts: usize,
    pub hidden: usize,
}

impl Default for WeightModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            experts: 3,
            hidden: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExpertIds {
    w0: ParamId,
    b0: ParamId,
    w1: ParamId,
    b1: ParamId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeadIds {
    gate_w: ParamId,
    gate_b: ParamId,
    tower_w0: ParamId,
    tower_b0: ParamId,
    tower_w1: ParamId,
    tower_b1: ParamId,
}

#[derive(Debug, Clone)]
pub struct WeightModel {
    pub schema: RequestSchema,
    pub config: WeightModelConfig,
    store: ParamStore,
    group_tables: Vec<ParamId>,
    experts: Vec<ExpertIds>,
    heads: Vec<HeadIds>,
}

type WeightLayout = (ParamStore, Vec<ParamId>, Vec<ExpertIds>, Vec<HeadIds>);

fn build_layout(
    schema: &RequestSchema,
    config: &WeightModelConfig,
    rng: &mut ChaCha8Rng,
) -> WeightLayout {
    let mut store = ParamStore::new();
    let group_tables: Vec<ParamId> = schema
        .group_cardinalities
        .iter()
        .enumerate()
        .map(|(j, &card)| store.add_embedding(format!("e_s[{j}]"), card, config.embed_dim, rng))
        .collect();
    let input_dim = schema.group_cardinalities.len() * config.embed_dim;
    let experts = (0..config.experts)
        .map(|m| ExpertIds {
            w0: store.add_dense_weight(format!("exp{m}.w0"), config.hidden, input_dim, rng),
            b0: store.add_bias(format!("exp{m}.b0"), config.hidden),
            w1: store.add_dense_weight(format!("exp{m}.w1"), config.hidden, config.hidden, rng),
            b1: store.add_bias(format!("exp{m}.b1"), config.hidden),
        })
        .collect();
    let heads = (0..schema.responses)
        .map(|r| HeadIds {
            gate_w: store.add_dense_weight(format!("head{r}.gate.w"), config.experts, input_dim, rng),
            gate_b: store.add_bias(format!("head{r}.gate.b"), config.experts),
            tower_w0: store.add_dense_weight(format!("head{r}.tower.w0"), config.hidden, config.hidden, rng),
            tower_b0: store.add_bias(format!("head{r}.tower.b0"), config.hidden),
            tower_w1: store.add_dense_weight(format!("head{r}.tower.w1"), 1, config.hidden, rng),
            tower_b1: store.add_bias(format!("head{r}.tower.b1"), 1),
        })
        .collect();
    (store, group_tables, experts, heads)
}

impl WeightModel {
    pub fn new(schema: RequestSchema, config: WeightModelConfig, seed: u64) -> Result<Self, DdmError> {
        if schema.group_cardinalities.is_empty() || schema.responses == 0 {
            return Err(DdmError::Input("request schema needs groups and responses".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (store, group_tables, experts, heads) = build_layout(&schema, &config, &mut rng);
        Ok(Self {
            schema,
            config,
            store,
            group_tables,
            experts,
            heads,
        })
    }

    fn check_context(&self, context: &RequestContext) -> Result<(), DdmError> {
        if context.groups.len() != self.schema.group_cardinalities.len() {
            return Err(DdmError::Input(format!(
                "request `{}` has {} groups, schema declares {}",
                context.user_id,
                context.groups.len(),
                self.schema.group_cardinalities.len()
            )));
        }
        for (group, &card) in context.groups.iter().zip(&self.schema.group_cardinalities) {
            if group.is_empty() {
                return Err(DdmError::EmptyGroup {
                    user_id: context.user_id.clone(),
                });
            }
            if let Some(&bad) = group.iter().find(|&&id| id >= card) {
                return Err(DdmError::Input(format!(
                    "request `{}`: item id {bad} outside cardinality {card}",
                    context.user_id
                )));
            }
        }
        Ok(())
    }

    /// Graph nodes for the pooled input of a batch of requests.
    fn pooled_nodes(&self, graph: &mut Graph, batch: &[&RequestContext]) -> Result<NodeId, DdmError> {
        let mut group_nodes = Vec::with_capacity(self.group_tables.len());
        for (j, &table) in self.group_tables.iter().enumerate() {
            let ids: Vec<Vec<usize>> = batch.iter().map(|ctx| ctx.groups[j].clone()).collect();
            let tn = graph.param(&self.store, table);
            group_nodes.push(graph.gather_mean(tn, &ids)?);
        }
        let mut fused = group_nodes[0];
        for &node in &group_nodes[1..] {
            fused = graph.concat_cols(fused, node)?;
        }
        Ok(fused)
    }

    /// Forward nodes: one `B x 1` sigmoid output per response.
    fn forward_nodes(&self, graph: &mut Graph, pooled: NodeId) -> Result<Vec<NodeId>, DdmError> {
        let expert_outs: Vec<NodeId> = self
            .experts
            .iter()
            .map(|e| {
                let w0 = graph.param(&self.store, e.w0);
                let b0 = graph.param(&self.store, e.b0);
                let h = graph.dense(pooled, w0, b0, Activation::Relu)?;
                let w1 = graph.param(&self.store, e.w1);
                let b1 = graph.param(&self.store, e.b1);
                graph.dense(h, w1, b1, Activation::Relu)
            })
            .collect::<Result<_, _>>()?;
        self.heads
            .iter()
            .map(|head| {
                let gw = graph.param(&self.store, head.gate_w);
                let gb = graph.param(&self.store, head.gate_b);
                let logits = graph.dense(pooled, gw, gb, Activation::Linear)?;
                let gate = graph.softmax_rows(logits)?;
                let mixed = graph.mix(gate, &expert_outs)?;
                let tw0 = graph.param(&self.store, head.tower_w0);
                let tb0 = graph.param(&self.store, head.tower_b0);
                let h = graph.dense(mixed, tw0, tb0, Activation::Relu)?;
                let tw1 = graph.param(&self.store, head.tower_w1);
                let tb1 = graph.param(&self.store, head.tower_b1);
                Ok(graph.dense(h, tw1, tb1, Activation::Sigmoid)?)
            })
            .collect()
    }

    /// Pooled input vector for one request.
    pub(crate) fn pooled_input(&self, context: &RequestContext) -> Result<Vec<f64>, DdmError> {
        self.check_context(context)?;
        let mut graph = Graph::new();
        let pooled = self.pooled_nodes(&mut graph, &[context])?;
        Ok(graph.value(pooled).row(0).to_vec())
    }

    /// Per-response raw interest scores in (0, 1).
    pub fn weight_forward(&self, context: &RequestContext) -> Result<Vec<f64>, DdmError> {
        Ok(self.forward_batch(&[context])?.pop().expect("one row"))
    }

    /// Batched forward pass.
    pub fn forward_batch(&self, batch: &[&RequestContext]) -> Result<Vec<Vec<f64>>, DdmError> {
        for ctx in batch {
            self.check_context(ctx)?;
        }
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(2048) {
            let mut graph = Graph::new();
            let pooled = self.pooled_nodes(&mut graph, chunk)?;
            let outputs = self.forward_nodes(&mut graph, pooled)?;
            for row in 0..chunk.len() {
                out.push(outputs.iter().map(|&o| graph.value(o).at(row, 0)).collect());
            }
        }
        Ok(out)
    }

    fn build_loss(
        &self,
        graph: &mut Graph,
        batch: &[&RequestContext],
        labels: &[Vec<f64>],
    ) -> Result<NodeId, DdmError> {
        let pooled = self.pooled_nodes(graph, batch)?;
        let outputs = self.forward_nodes(graph, pooled)?;
        let mut terms = Vec::with_capacity(outputs.len());
        for (r, &node) in outputs.iter().enumerate() {
            let target: Vec<f64> = labels.iter().map(|l| l[r]).collect();
            let sq = graph.sq_err(node, &target)?;
            terms.push(graph.sum_all(sq));
        }
        let total = graph.add_n(&terms)?;
        Ok(graph.scale(total, 1.0 / (batch.len() * outputs.len()) as f64))
    }

    pub fn save(&self, path: &Path) -> Result<(), DdmError> {
        let file = WeightCheckpoint {
            version: 1,
            schema: self.schema.clone(),
            config: self.config.clone(),
            params: self.store.clone(),
        };
        let out = File::create(path).map_err(|e| DdmError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::to_writer(BufWriter::new(out), &file)
            .map_err(|e| DdmError::Checkpoint(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DdmError> {
        let file = File::open(path).map_err(|e| DdmError::Checkpoint(format!("{}: {e}", path.display())))?;
        let parsed: WeightCheckpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| DdmError::Checkpoint(format!("{}: {e}", path.display())))?;
        if parsed.version != 1 {
            return Err(DdmError::Checkpoint(format!(
                "version mismatch: file has {}, expected 1",
                parsed.version
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (expected, group_tables, experts, heads) = build_layout(&parsed.schema, &parsed.config, &mut rng);
        if expected.len() != parsed.params.len() {
            return Err(DdmError::Checkpoint("parameter count mismatch".into()));
        }
        for ((_, a), (_, b)) in expected.iter().zip(parsed.params.iter()) {
            if a.name != b.name || a.rows != b.rows || a.cols != b.cols {
                return Err(DdmError::Checkpoint(format!(
                    "parameter `{}` does not match layout slot `{}`",
                    b.name, a.name
                )));
            }
        }
        let mut params = parsed.params;
        params.ensure_grad_buffers();
        Ok(Self {
            schema: parsed.schema,
            config: parsed.config,
            store: params,
            group_tables,
            experts,
            heads,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct WeightCheckpoint {
    version: u32,
    schema: RequestSchema,
    config: WeightModelConfig,
    params: ParamStore,
}

#[derive(Debug, Clone)]
pub struct WeightTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for WeightTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            learning_rate: 0.001,
            plateau_patience: 2,
            plateau_factor: 0.6,
            max_epochs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct WeightTrainReport {
    pub train_losses: Vec<f64>,
    pub skipped_requests: usize,
    pub final_learning_rate: f64,
}

/// Trains on proportion labels with squared-error loss. Requests with an
/// empty exposure log are skipped and counted.
pub fn train_weight_model(
    model: &mut WeightModel,
    requests: &[RequestContext],
    cfg: &WeightTrainConfig,
) -> Result<WeightTrainReport, DdmError> {
    let responses = model.schema.responses;
    let mut labeled: Vec<(&RequestContext, Vec<f64>)> = Vec::with_capacity(requests.len());
    let mut skipped = 0usize;
    for req in requests {
        match proportion_label(&req.exposures, responses) {
            Some(label) => labeled.push((req, label)),
            None => skipped += 1,
        }
    }
    if labeled.is_empty() {
        return Err(DdmError::Input("no labeled requests to train on".into()));
    }

    let mut adam = Adam::new(&model.store, cfg.learning_rate);
    let mut schedule = PlateauSchedule::new(cfg.plateau_patience, cfg.plateau_factor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut report = WeightTrainReport {
        skipped_requests: skipped,
        ..Default::default()
    };

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&RequestContext> = chunk.iter().map(|&i| labeled[i].0).collect();
            let labels: Vec<Vec<f64>> = chunk.iter().map(|&i| labeled[i].1.clone()).collect();
            let mut graph = Graph::new();
            let loss = model.build_loss(&mut graph, &batch, &labels)?;
            let value = graph.scalar_value(loss).map_err(DdmError::Nn)?;
            if !value.is_finite() {
                return Err(DdmError::Diverged { epoch, loss: value });
            }
            model.store.zero_grads();
            graph.backward(loss, &mut model.store).map_err(DdmError::Nn)?;
            adam.step(&mut model.store).map_err(DdmError::Nn)?;
            epoch_loss += value * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = epoch_loss / seen as f64;
        report.train_losses.push(train_loss);
        report.final_learning_rate = plateau_update(&mut schedule, &mut adam, train_loss);
    }
    Ok(report)
}

/// Jitters parameters to a generic position before finite differences.
pub fn weight_perturb_parameters(model: &mut WeightModel, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.store.jitter(scale, &mut rng);
}

/// Finite-difference verification of the weight-model loss gradients.
pub fn weight_gradient_check(
    model: &mut WeightModel,
    requests: &[RequestContext],
    step: f64,
    denom_floor: f64,
) -> Result<GradCheckReport, DdmError> {
    let responses = model.schema.responses;
    let labeled: Vec<(&RequestContext, Vec<f64>)> = requests
        .iter()
        .filter_map(|r| proportion_label(&r.exposures, responses).map(|l| (r, l)))
        .collect();
    if labeled.is_empty() {
        return Err(DdmError::Input("no labeled requests".into()));
    }
    let batch: Vec<&RequestContext> = labeled.iter().map(|(r, _)| *r).collect();
    let labels: Vec<Vec<f64>> = labeled.iter().map(|(_, l)| l.clone()).collect();
    let mut probe = model.clone();
    let report = finite_difference_check(&mut model.store, step, denom_floor, |store, want_grad| {
        probe.store = store.clone();
        let mut graph = Graph::new();
        let loss = probe
            .build_loss(&mut graph, &batch, &labels)
            .map_err(|e| crate::nn::NnError::InvalidArgument(e.to_string()))?;
        let value = graph.scalar_value(loss)?;
        if want_grad {
            graph.backward(loss, store)?;
        }
        Ok(value)
    })
    .map_err(DdmError::Nn)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_rct, SyntheticConfig};
    use crate::ddm::request::{synthetic_requests, RequestSimConfig};
    use crate::ddm::value_weights;
    use approx::assert_relative_eq;

    fn toy_schema() -> RequestSchema {
        RequestSchema {
            group_cardinalities: vec![4, 6],
            responses: 2,
        }
    }

    fn toy_config() -> WeightModelConfig {
        WeightModelConfig {
            embed_dim: 4,
            experts: 2,
            hidden: 6,
        }
    }

    fn ctx(id: &str, groups: Vec<Vec<usize>>, exposures: Vec<Vec<f64>>) -> RequestContext {
        RequestContext {
            user_id: id.into(),
            groups,
            exposures,
        }
    }

    #[test]
    fn pooling_identity_on_single_items() {
        let model = WeightModel::new(toy_schema(), toy_config(), 3).unwrap();
        let context = ctx("u", vec![vec![2], vec![5]], vec![]);
        let pooled = model.pooled_input(&context).unwrap();
        let t0 = model.store.get(model.group_tables[0]);
        let t1 = model.store.get(model.group_tables[1]);
        assert_eq!(&pooled[..4], t0.row(2));
        assert_eq!(&pooled[4..], t1.row(5));
    }

    #[test]
    fn pooling_hand_arithmetic() {
        let mut model = WeightModel::new(
            RequestSchema {
                group_cardinalities: vec![3, 3],
                responses: 2,
            },
            WeightModelConfig {
                embed_dim: 2,
                experts: 2,
                hidden: 4,
            },
            0,
        )
        .unwrap();
        let t0 = model.group_tables[0];
        model.store.get_mut(t0).values = vec![1.0, 0.0, 3.0, 0.0, 0.0, 0.0];
        let t1 = model.group_tables[1];
        model.store.get_mut(t1).values = vec![0.0, 2.0, 0.0, 4.0, 0.0, 0.0];
        // group 0: mean of rows 0 and 1 -> [2, 0]; group 1: mean of rows 0,1 -> [0, 3]
        let pooled = model
            .pooled_input(&ctx("u", vec![vec![0, 1], vec![0, 1]], vec![]))
            .unwrap();
        assert_eq!(pooled, vec![2.0, 0.0, 0.0, 3.0]);
        // a duplicated item shifts the mean toward it
        let shifted = model
            .pooled_input(&ctx("u", vec![vec![0, 1, 1], vec![0]], vec![]))
            .unwrap();
        assert_relative_eq!(shifted[0], (1.0 + 3.0 + 3.0) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_group_is_an_error() {
        let model = WeightModel::new(toy_schema(), toy_config(), 3).unwrap();
        let err = model
            .pooled_input(&ctx("u9", vec![vec![], vec![1]], vec![]))
            .unwrap_err();
        assert!(matches!(err, DdmError::EmptyGroup { user_id } if user_id == "u9"));
    }

    #[test]
    fn forward_outputs_are_in_unit_interval() {
        let model = WeightModel::new(toy_schema(), toy_config(), 11).unwrap();
        let out = model
            .weight_forward(&ctx("u", vec![vec![0, 1], vec![2]], vec![]))
            .unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|&o| o > 0.0 && o < 1.0));
        let w = value_weights(&out);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_is_deterministic() {
        let model = WeightModel::new(toy_schema(), toy_config(), 11).unwrap();
        let context = ctx("u", vec![vec![3, 0], vec![4, 4]], vec![]);
        assert_eq!(
            model.weight_forward(&context).unwrap(),
            model.weight_forward(&context).unwrap()
        );
    }

    #[test]
    fn converges_toward_constant_labels() {
        // Every request carries the same label vector; the model must
        // approach it.
        let mut model = WeightModel::new(toy_schema(), toy_config(), 5).unwrap();
        let target = [0.8, 0.2];
        let requests: Vec<RequestContext> = (0..64)
            .map(|i| {
                let exposures = (0..10)
                    .map(|v| {
                        if (v + i) % 10 < 8 {
                            vec![0.9, 0.1]
                        } else {
                            vec![0.1, 0.9]
                        }
                    })
                    .collect();
                ctx(&format!("u{i}"), vec![vec![i % 4], vec![i % 6]], exposures)
            })
            .collect();
        let cfg = WeightTrainConfig {
            batch_size: 16,
            max_epochs: 60,
            learning_rate: 0.01,
            ..Default::default()
        };
        let report = train_weight_model(&mut model, &requests, &cfg).unwrap();
        assert_eq!(report.skipped_requests, 0);
        let out = model.weight_forward(&requests[0]).unwrap();
        assert!((out[0] - target[0]).abs() < 0.1, "out {out:?}");
        assert!((out[1] - target[1]).abs() < 0.1, "out {out:?}");
    }

    #[test]
    fn training_loss_decreases_on_synthetic_requests() {
        let rct = generate_synthetic_rct(&SyntheticConfig {
            n: 800,
            seed: 3,
            bins: 8,
            ..Default::default()
        })
        .unwrap();
        let (schema, requests) = synthetic_requests(&rct, &RequestSimConfig::default());
        let mut model = WeightModel::new(schema, toy_config(), 1).unwrap();
        let cfg = WeightTrainConfig {
            max_epochs: 5,
            ..Default::default()
        };
        let report = train_weight_model(&mut model, &requests, &cfg).unwrap();
        assert!(report.train_losses.last().unwrap() < report.train_losses.first().unwrap());
    }

    #[test]
    fn empty_exposures_counted_as_skipped() {
        let mut model = WeightModel::new(toy_schema(), toy_config(), 5).unwrap();
        let mut requests = vec![ctx("u0", vec![vec![0], vec![1]], vec![vec![0.9, 0.1]; 4])];
        requests.push(ctx("u1", vec![vec![1], vec![2]], vec![]));
        let report = train_weight_model(&mut model, &requests, &WeightTrainConfig {
            max_epochs: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(report.skipped_requests, 1);
    }

    #[test]
    fn gradient_check_passes() {
        let rct = generate_synthetic_rct(&SyntheticConfig {
            n: 32,
            seed: 9,
            bins: 4,
            ..Default::default()
        })
        .unwrap();
        let (schema, requests) = synthetic_requests(&rct, &RequestSimConfig {
            videos_per_request: 8,
            seed: 2,
        });
        let mut model = WeightModel::new(schema, WeightModelConfig {
            embed_dim: 3,
            experts: 2,
            hidden: 4,
        }, 7)
        .unwrap();
        weight_perturb_parameters(&mut model, 0.5, 13);
        let report = weight_gradient_check(&mut model, &requests, 1e-4, 1e-3).unwrap();
        assert!(
            report.max_relative_error < 1e-3,
            "max relative error {}",
            report.max_relative_error
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = WeightModel::new(toy_schema(), toy_config(), 19).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.json");
        model.save(&path).unwrap();
        let loaded = WeightModel::load(&path).unwrap();
        let context = ctx("u", vec![vec![1, 2], vec![0]], vec![]);
        assert_eq!(
            model.weight_forward(&context).unwrap(),
            loaded.weight_forward(&context).unwrap()
        );
    }
}
