//! Equal-frequency discretization of continuous features.

use crate::data::DataError;

/// Fits equal-frequency bin boundaries on a column. Boundaries are midpoints
/// between neighboring sorted values at the quantile cuts, deduplicated so
/// they stay strictly increasing. A constant column yields no boundaries
/// (a single bin) and logs a warning.
pub fn discretize_fit(column: &[f64], num_bins: usize) -> Result<Vec<f64>, DataError> {
    if num_bins < 2 {
        return Err(DataError::Schema("num_bins must be >= 2".into()));
    }
    if column.is_empty() {
        return Err(DataError::Schema("cannot fit bins on an empty column".into()));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(DataError::Schema("non-finite value in continuous column".into()));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let mut boundaries = Vec::with_capacity(num_bins - 1);
    for i in 1..num_bins {
        let cut = i * n / num_bins;
        if cut == 0 || cut >= n {
            continue;
        }
        let lo = sorted[cut - 1];
        let hi = sorted[cut];
        if lo < hi {
            let b = (lo + hi) / 2.0;
            if boundaries.last().map_or(true, |&prev| prev < b) {
                boundaries.push(b);
            }
        }
    }
    if boundaries.is_empty() && sorted[0] < sorted[n - 1] {
        // All cuts fell inside runs of duplicates; split at the midrange so
        // the feature is not silently flattened.
        boundaries.push((sorted[0] + sorted[n - 1]) / 2.0);
    }
    if boundaries.is_empty() {
        log::warn!("constant continuous column; using a single bin");
    }
    Ok(boundaries)
}

/// Bin id for a value: the number of boundaries strictly below it. Values
/// below every boundary map to 0 and values above every boundary map to the
/// last bin.
pub fn bin_index(value: f64, boundaries: &[f64]) -> usize {
    boundaries.partition_point(|b| *b < value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn quartiles_of_1_to_100() {
        let column: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let b = discretize_fit(&column, 4).unwrap();
        // Quantile oracle on the sorted list: cuts between ranks 25/26, 50/51, 75/76.
        assert_eq!(b.len(), 3);
        assert_relative_eq!(b[0], 25.5, epsilon = 1e-12);
        assert_relative_eq!(b[1], 50.5, epsilon = 1e-12);
        assert_relative_eq!(b[2], 75.5, epsilon = 1e-12);
        for (i, v) in column.iter().enumerate() {
            let bin = bin_index(*v, &b);
            assert_eq!(bin, i / 25);
        }
    }

    #[test]
    fn constant_column_single_bin() {
        let b = discretize_fit(&[7.0; 10], 4).unwrap();
        assert!(b.is_empty());
        assert_eq!(bin_index(7.0, &b), 0);
        assert_eq!(bin_index(-100.0, &b), 0);
    }

    #[test]
    fn clamping_at_the_edges() {
        let b = vec![1.0, 2.0, 3.0];
        assert_eq!(bin_index(0.0, &b), 0);
        assert_eq!(bin_index(99.0, &b), 3);
    }

    #[test]
    fn rejects_one_bin() {
        assert!(discretize_fit(&[1.0, 2.0], 1).is_err());
    }

    proptest! {
        #[test]
        fn binning_is_monotone(mut values in proptest::collection::vec(-1e6f64..1e6, 2..200), bins in 2usize..20) {
            let b = discretize_fit(&values, bins).unwrap();
            values.sort_by(|a, c| a.partial_cmp(c).unwrap());
            for w in values.windows(2) {
                prop_assert!(bin_index(w[0], &b) <= bin_index(w[1], &b));
            }
            for v in &values {
                prop_assert!(bin_index(*v, &b) < b.len() + 1);
            }
            prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
