//! Scalar/vector numeric kernels shared by the computation graph and by
//! callers that need the plain functions.

use crate::nn::NnError;

/// Epsilon floor applied to the right-hand distribution of a KL divergence so
/// a saturated softmax cannot drive the divergence to infinity.
pub const KL_EPSILON: f64 = 1e-8;

/// Numerically stable softmax. Shift-invariant; outputs are positive and sum
/// to one.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, NnError> {
    if logits.is_empty() {
        return Err(NnError::Dimension {
            op: "softmax",
            detail: "empty input".into(),
        });
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// KL divergence `D(p || q)` in nats, with the `0 * ln(0/q) = 0` convention
/// and the [`KL_EPSILON`] floor (plus renormalization) applied to `q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, NnError> {
    if p.len() != q.len() {
        return Err(NnError::Dimension {
            op: "kl_divergence",
            detail: format!("p has length {}, q has length {}", p.len(), q.len()),
        });
    }
    if p.is_empty() {
        return Err(NnError::Dimension {
            op: "kl_divergence",
            detail: "empty input".into(),
        });
    }
    for (name, v) in [("p", p), ("q", q)] {
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(NnError::InvalidArgument(format!(
                "kl_divergence: {name} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(kl_row(p, q))
}

/// Unchecked KL kernel used by both [`kl_divergence`] and the graph op.
pub(crate) fn kl_row(p: &[f64], q: &[f64]) -> f64 {
    let mut sum_m = 0.0;
    for &qj in q {
        sum_m += qj.max(KL_EPSILON);
    }
    let ln_s = sum_m.ln();
    let mut acc = 0.0;
    for (&pj, &qj) in p.iter().zip(q) {
        if pj > 0.0 {
            acc += pj * (pj.ln() - qj.max(KL_EPSILON).ln() + ln_s);
        }
    }
    acc
}

/// Mean squared error between two equal-length vectors.
pub fn mse(pred: &[f64], label: &[f64]) -> Result<f64, NnError> {
    if pred.len() != label.len() {
        return Err(NnError::Dimension {
            op: "mse",
            detail: format!("pred has length {}, label has length {}", pred.len(), label.len()),
        });
    }
    if pred.is_empty() {
        return Err(NnError::Dimension {
            op: "mse",
            detail: "empty input".into(),
        });
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(label)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softmax_symmetry() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_shift_invariance() {
        for c in [-100.0, 0.0, 3.5, 700.0] {
            let out = softmax(&[c, c, c]).unwrap();
            for v in out {
                assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn softmax_two_logits() {
        // High-precision evaluation of e / (1 + e) frozen as the oracle value.
        let out = softmax(&[1.0, 2.0]).unwrap();
        assert_relative_eq!(out[0], 0.26894, epsilon = 1e-5);
        assert_relative_eq!(out[1], 0.73106, epsilon = 1e-5);
        assert_relative_eq!(out.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn softmax_empty_is_error() {
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn kl_identical_is_zero() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn kl_point_mass() {
        let d = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(d, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn kl_floor_keeps_divergence_finite() {
        // q has a zero entry; the epsilon floor must yield a large finite value.
        let d = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!(d.is_finite());
        // 0.5*ln(0.5/1) + 0.5*ln(0.5/eps) with S = 1 + eps.
        let s: f64 = 1.0 + KL_EPSILON;
        let expect = 0.5 * ((0.5f64).ln() - 0.0 + s.ln()) + 0.5 * ((0.5f64).ln() - KL_EPSILON.ln() + s.ln());
        assert_relative_eq!(d, expect, epsilon = 1e-12);
    }

    #[test]
    fn kl_length_mismatch() {
        assert!(kl_divergence(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn kl_rejects_unnormalized() {
        assert!(kl_divergence(&[0.7, 0.7], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
