//! Finite-difference gradient verification.
//!
//! Central differences at a configurable step, compared against the analytic
//! gradients accumulated by [`Graph::backward`](crate::nn::Graph::backward).
//! Relative error uses an absolute floor in the denominator so near-zero
//! gradients are compared onable terms.

use crate::nn::params::ParamStore;
use crate::nn::NnError;

/// Worst relative error per parameter tensor plus the overall maximum.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub per_param: Vec<(String, f64)>,
}

/// Compares analytic and central-difference gradients of `loss_fn`.
///
/// `loss_fn(store, true)` must run a full forward/backward pass, leaving
/// gradients in the store; `loss_fn(store, false)` must return the loss value
/// without touching gradients. The relative error of each entry is
/// `|ga - gn| / max(|ga|, |gn|, denom_floor)`.
pub fn finite_difference_check<F>(
    store: &mut ParamStore,
    step: f64,
    denom_floor: f64,
    mut loss_fn: F,
) -> Result<GradCheckReport, NnError>
where
    F: FnMut(&mut ParamStore, bool) -> Result<f64, NnError>,
{
    store.zero_grads();
    loss_fn(store, true)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|(_, p)| p.grad.clone()).collect();
    let names: Vec<String> = store.iter().map(|(_, p)| p.name.clone()).collect();

    let mut per_param = Vec::with_capacity(names.len());
    let mut overall: f64 = 0.0;
    for i in 0..names.len() {
        let id = crate::nn::params::ParamId(i);
        let len = store.get(id).values.len();
        let mut worst: f64 = 0.0;
        for j in 0..len {
            let original = store.get(id).values[j];
            store.get_mut(id).values[j] = original + step;
            let plus = loss_fn(store, false)?;
            store.get_mut(id).values[j] = original - step;
            let minus = loss_fn(store, false)?;
            store.get_mut(id).values[j] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let ga = analytic[i][j];
            let err = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(denom_floor);
            if err > worst {
                worst = err;
            }
        }
        overall = overall.max(worst);
        per_param.push((names[i].clone(), worst));
    }
    Ok(GradCheckReport {
        max_relative_error: overall,
        per_param,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::{Activation, Graph};
    use crate::nn::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_mse_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut store = ParamStore::new();
        let w = store.add_dense_weight("w", 3, 4, &mut rng);
        let b = store.add_bias("b", 3);
        let w2 = store.add_dense_weight("w2", 1, 3, &mut rng);
        let b2 = store.add_bias("b2", 1);
        let x: Vec<f64> = (0..8 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let report = finite_difference_check(&mut store, 1e-4, 1e-3, |store, want_grad| {
            let mut g = Graph::new();
            let xin = g.input(Tensor::new(8, 4, x.clone()));
            let wn = g.param(store, w);
            let bn = g.param(store, b);
            let h = g.dense(xin, wn, bn, Activation::Relu)?;
            let w2n = g.param(store, w2);
            let b2n = g.param(store, b2);
            let pred = g.dense(h, w2n, b2n, Activation::Linear)?;
            let err = g.sq_err(pred, &y)?;
            let total = g.sum_all(err);
            let loss = g.scale(total, 1.0 / 8.0);
            let value = g.scalar_value(loss)?;
            if want_grad {
                g.backward(loss, store)?;
            }
            Ok(value)
        })
        .unwrap();
        assert!(
            report.max_relative_error < 1e-3,
            "max relative error {} too large",
            report.max_relative_error
        );
    }

    #[test]
    fn softmax_kl_path_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let w1 = store.add_dense_weight("w1", 4, 3, &mut rng);
        let b1 = store.add_bias("b1", 4);
        let w2 = store.add_dense_weight("w2", 4, 3, &mut rng);
        let b2 = store.add_bias("b2", 4);
        let x: Vec<f64> = (0..6 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let report = finite_difference_check(&mut store, 1e-4, 1e-3, |store, want_grad| {
            let mut g = Graph::new();
            let xin = g.input(Tensor::new(6, 3, x.clone()));
            let (w1n, b1n, w2n, b2n) =
                (g.param(store, w1), g.param(store, b1), g.param(store, w2), g.param(store, b2));
            let p_logits = g.dense(xin, w1n, b1n, Activation::Linear)?;
            let q_logits = g.dense(xin, w2n, b2n, Activation::Linear)?;
            let p = g.softmax_rows(p_logits)?;
            let q = g.softmax_rows(q_logits)?;
            let mean = g.mean_of(&[p, q])?;
            let kl = g.kl_rows(p, mean)?;
            let total = g.sum_all(kl);
            let loss = g.scale(total, 1.0 / 6.0);
            let value = g.scalar_value(loss)?;
            if want_grad {
                g.backward(loss, store)?;
            }
            Ok(value)
        })
        .unwrap();
        assert!(
            report.max_relative_error < 1e-3,
            "max relative error {} too large",
            report.max_relative_error
        );
    }

    #[test]
    fn gather_mix_path_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let table = store.add_embedding("table", 5, 3, &mut rng);
        let gate_w = store.add_dense_weight("gate_w", 2, 3, &mut rng);
        let gate_b = store.add_bias("gate_b", 2);
        let ids = vec![0usize, 3, 1, 4];
        let ids2 = vec![2usize, 2, 0, 1];
        let y = vec![0.3, -0.1, 0.5, 0.2];

        let report = finite_difference_check(&mut store, 1e-4, 1e-3, |store, want_grad| {
            let mut g = Graph::new();
            let tn = g.param(store, table);
            let e1 = g.gather(tn, &ids)?;
            let e2 = g.gather(tn, &ids2)?;
            let (gw, gb) = (g.param(store, gate_w), g.param(store, gate_b));
            let logits = g.dense(e1, gw, gb, Activation::Linear)?;
            let gate = g.softmax_rows(logits)?;
            let mixed = g.mix(gate, &[e1, e2])?;
            let fused = g.concat_cols(mixed, e2)?;
            // collapse to one column via a fixed linear readout
            let readout = g.input(Tensor::new(1, 6, vec![0.2, -0.3, 0.5, 0.1, 0.4, -0.2]));
            let zero = g.input(Tensor::new(1, 1, vec![0.0]));
            let pred = g.dense(fused, readout, zero, Activation::Sigmoid)?;
            let err = g.sq_err(pred, &y)?;
            let total = g.sum_all(err);
            let loss = g.scale(total, 0.25);
            let value = g.scalar_value(loss)?;
            if want_grad {
                g.backward(loss, store)?;
            }
            Ok(value)
        })
        .unwrap();
        assert!(
            report.max_relative_error < 1e-3,
            "max relative error {} too large",
            report.max_relative_error
        );
    }
}
