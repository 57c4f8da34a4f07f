//! Minibatch training with Adam and reduce-on-plateau scheduling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Instance;
use crate::hum::loss::{build_loss, hum_loss};
use crate::hum::model::HumModel;
use crate::hum::HumError;
use crate::nn::{finite_difference_check, plateau_update, Adam, GradCheckReport, Graph, PlateauSchedule};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4096,
            learning_rate: 0.001,
            plateau_patience: 2,
            plateau_factor: 0.6,
            max_epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub final_learning_rate: f64,
    pub epochs_run: usize,
}

/// Trains the model in place. Label standardization is fitted on the
/// training split; validation drives the plateau schedule; training stops at
/// the epoch bound and aborts with diagnostics if the loss leaves the finite
/// range.
pub fn train(
    model: &mut HumModel,
    train_set: &[Instance],
    validation: &[Instance],
    cfg: &TrainConfig,
) -> Result<TrainReport, HumError> {
    if train_set.is_empty() {
        return Err(HumError::EmptyBatch);
    }
    if cfg.batch_size == 0 {
        return Err(HumError::Input("batch_size must be nonzero".into()));
    }
    let labels: Vec<f64> = train_set.iter().map(|i| i.y[model.response]).collect();
    model.set_label_stats(&labels);

    let mut adam = Adam::new(model.store(), cfg.learning_rate);
    let mut schedule = PlateauSchedule::new(cfg.plateau_patience, cfg.plateau_factor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Instance> = batch_idx.iter().map(|&i| &train_set[i]).collect();
            let mut graph = Graph::new();
            let loss = build_loss(model, &mut graph, &batch)?;
            let value = graph.scalar_value(loss)?;
            if !value.is_finite() {
                return Err(HumError::Diverged { epoch, loss: value });
            }
            model.store_mut().zero_grads();
            graph.backward(loss, model.store_mut())?;
            adam.step(model.store_mut())?;
            epoch_loss += value * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = epoch_loss / seen as f64;
        report.train_losses.push(train_loss);
        report.epochs_run = epoch + 1;

        let val_loss = if validation.is_empty() {
            train_loss
        } else {
            evaluation_loss(model, validation, cfg.batch_size)?
        };
        if !val_loss.is_finite() {
            return Err(HumError::Diverged { epoch, loss: val_loss });
        }
        report.val_losses.push(val_loss);
        report.final_learning_rate = plateau_update(&mut schedule, &mut adam, val_loss);
    }
    Ok(report)
}

/// Forward-only loss over a dataset, in evaluation batches.
pub fn evaluation_loss(
    model: &HumModel,
    data: &[Instance],
    batch_size: usize,
) -> Result<f64, HumError> {
    if data.is_empty() {
        return Err(HumError::EmptyBatch);
    }
    let mut total = 0.0;
    for chunk in data.chunks(batch_size.max(1)) {
        let value = hum_loss(model, chunk)?;
        total += value * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Moves every parameter to a generic position (uniform jitter). Run before
/// [`gradient_check`]: a freshly initialized model keeps its rectifier units
/// within the finite-difference step of their kinks, which invalidates the
/// numeric side of the comparison.
pub fn perturb_parameters(model: &mut HumModel, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.store_mut().jitter(scale, &mut rng);
}

/// Central finite differences against the analytic gradients of the full
/// batch loss (masking and KL included). `denom_floor` guards the relative
/// error of near-zero gradients.
pub fn gradient_check(
    model: &mut HumModel,
    batch: &[Instance],
    step: f64,
    denom_floor: f64,
) -> Result<GradCheckReport, HumError> {
    if batch.is_empty() {
        return Err(HumError::EmptyBatch);
    }
    let refs: Vec<&Instance> = batch.iter().collect();
    // The probe shares the architecture; each evaluation sees the perturbed
    // parameter values through a store copy.
    let mut probe = model.clone();
    let report = finite_difference_check(model.store_mut(), step, denom_floor, |store, want_grad| {
        *probe.store_mut() = store.clone();
        let mut graph = Graph::new();
        let loss = build_loss(&probe, &mut graph, &refs).map_err(nn_from_hum)?;
        let value = graph.scalar_value(loss)?;
        if want_grad {
            graph.backward(loss, store)?;
        }
        Ok(value)
    })?;
    Ok(report)
}

fn nn_from_hum(e: HumError) -> crate::nn::NnError {
    match e {
        HumError::Nn(inner) => inner,
        other => crate::nn::NnError::InvalidArgument(other.to_string()),
    }
}
