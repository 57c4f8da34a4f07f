//! Deterministic random splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DataError;

/// Shuffles with the seed and cuts into train/validation/test. Ratios must
/// be positive and sum to 1; the split is disjoint and exhaustive, with
/// rounding remainders going to the test portion.
pub fn split<T: Clone>(
    items: &[T],
    ratios: [f64; 3],
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>), DataError> {
    if items.is_empty() {
        return Err(DataError::Invalid("cannot split an empty dataset".into()));
    }
    if ratios.iter().any(|r| *r <= 0.0) {
        return Err(DataError::Invalid("split ratios must be positive".into()));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DataError::Invalid(format!("split ratios sum to {total}, expected 1")));
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = ((n as f64) * ratios[0]).floor() as usize;
    let n_val = ((n as f64) * ratios[1]).floor() as usize;
    let take = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((
        take(&order[..n_train]),
        take(&order[n_train..n_train + n_val]),
        take(&order[n_train + n_val..]),
    ))
}
