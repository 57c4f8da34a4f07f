//! Adam optimizer and reduce-on-plateau learning-rate scheduling.

use serde::{Deserialize, Serialize};

use crate::nn::params::ParamStore;
use crate::nn::NnError;

/// Adam with bias correction. Defaults: beta1 = 0.9, beta2 = 0.999,
/// epsilon = 1e-8.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        let shapes: Vec<usize> = store.iter().map(|(_, p)| p.len()).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over every parameter using the gradients accumulated in the
    /// store.
    ///
    /// Entries with an exactly-zero gradient are skipped (moments included),
    /// the sparse/lazy variant: masked towers and untouched embedding rows
    /// stay bit-identical across steps.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), NnError> {
        for (_, p) in store.iter() {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFinite {
                    what: "gradient",
                    name: p.name.clone(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..store.len() {
            let id = crate::nn::params::ParamId(i);
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = store.get_mut(id);
            for j in 0..p.values.len() {
                let g = p.grad[j];
                if g == 0.0 {
                    continue;
                }
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p.values[j] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        store.check_finite()
    }
}

/// Reduce-on-plateau: after `patience` consecutive epochs without an
/// improvement of the best validation loss, multiply the learning rate by
/// `factor`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub patience: usize,
    pub factor: f64,
    best: f64,
    stale: usize,
}

impl PlateauSchedule {
    pub fn new(patience: usize, factor: f64) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        assert!(factor > 0.0 && factor < 1.0, "factor must be in (0, 1)");
        Self {
            patience,
            factor,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Feed one validation loss; returns true when the rate should be
    /// reduced now (the stale counter resets on reduction).
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.stale = 0;
            return true;
        }
        false
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Applies the schedule to an optimizer; returns the (possibly reduced)
/// learning rate.
pub fn plateau_update(schedule: &mut PlateauSchedule, adam: &mut Adam, val_loss: f64) -> f64 {
    if schedule.observe(val_loss) {
        adam.lr *= schedule.factor;
    }
    adam.lr
}
