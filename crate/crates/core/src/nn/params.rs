//! Named parameter tensors with accumulated gradients.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nn::NnError;

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// One trainable tensor: values plus an accumulated gradient of the same
/// shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row `r` of the value matrix.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    fn ensure_grad(&mut self) {
        if self.grad.len() != self.values.len() {
            self.grad = vec![0.0; self.values.len()];
        }
    }
}

/// Flat collection of all parameters of one model.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) -> ParamId {
        assert_eq!(values.len(), rows * cols);
        let grad = vec![0.0; values.len()];
        self.params.push(ParamTensor {
            name: name.into(),
            rows,
            cols,
            values,
            grad,
        });
        ParamId(self.params.len() - 1)
    }

    /// Dense weight of shape `out x in`, initialized uniformly in
    /// `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn add_dense_weight<R: Rng>(
        &mut self,
        name: impl Into<String>,
        out_dim: usize,
        in_dim: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let values = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        self.add(name, out_dim, in_dim, values)
    }

    /// Bias vector of shape `1 x n`, initialized to zero.
    pub fn add_bias(&mut self, name: impl Into<String>, n: usize) -> ParamId {
        self.add(name, 1, n, vec![0.0; n])
    }

    /// Embedding table of shape `rows x dim`, initialized from N(0, 0.01).
    pub fn add_embedding<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        dim: usize,
        rng: &mut R,
    ) -> ParamId {
        let normal = Normal::new(0.0, 0.01).expect("valid stddev");
        let values = (0..rows * dim).map(|_| normal.sample(rng)).collect();
        self.add(name, rows, dim, values)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamTensor)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.ensure_grad();
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, grad: &[f64]) {
        let p = &mut self.params[id.0];
        p.ensure_grad();
        for (g, d) in p.grad.iter_mut().zip(grad) {
            *g += d;
        }
    }

    /// Restores gradient buffers after deserialization (serde skips them).
    pub fn ensure_grad_buffers(&mut self) {
        for p in &mut self.params {
            p.ensure_grad();
        }
    }

    /// Adds uniform noise in `[-scale, scale]` to every value. Finite
    /// difference checks need parameters at a generic position: a freshly
    /// initialized network keeps its piecewise-linear units too close to
    /// their kinks for central differences at practical step sizes.
    pub fn jitter<R: Rng>(&mut self, scale: f64, rng: &mut R) {
        for p in &mut self.params {
            for v in &mut p.values {
                *v += rng.gen_range(-scale..scale);
            }
        }
    }

    /// Error if any parameter value is non-finite; names the offender.
    pub fn check_finite(&self) -> Result<(), NnError> {
        for p in &self.params {
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite {
                    what: "value",
                    name: p.name.clone(),
                });
            }
        }
        Ok(())
    }
}
