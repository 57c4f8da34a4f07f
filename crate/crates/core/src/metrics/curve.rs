//! Uplift ranking metrics: qini and uplift (AUUC) curves with normalized
//! coefficients.
//!
//! Instances are sorted by score descending (stable, so ties keep input
//! order). With prefix sums `Y_T(n), Y_C(n)` and counts `N_T(n), N_C(n)`:
//!
//! * qini point:   `Q(n) = Y_T(n) - Y_C(n) * N_T(n) / N_C(n)`
//! * uplift point: `u(n) = (Y_T(n)/N_T(n) - Y_C(n)/N_C(n)) * n`
//!
//! Prefixes where one group is still empty use the group mean observed at its
//! first occurrence in rank order (the "carried ratio"). Curves are drawn
//! over population fraction with a leading (0, 0) point and integrated with
//! the trapezoid rule. The coefficient normalizes the model area between the
//! random diagonal and the perfect curve:
//! `(area_model - area_random) / (area_perfect - area_random)`.
//!
//! The perfect curve ranks treated instances by label descending followed by
//! control instances by label ascending. This single construction serves
//! both binary and continuous labels, which keeps the continuous adaptation
//! (min-max label normalization) an exact no-op on labels already in {0, 1}.

use crate::metrics::MetricError;

#[derive(Debug, Clone)]
pub struct UpliftCurve {
    /// (population fraction, cumulative uplift value), starting at (0, 0).
    pub points: Vec<(f64, f64)>,
    pub area_model: f64,
    pub area_random: f64,
    pub area_perfect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Qini,
    Auuc,
}

/// Normalized qini coefficient and curve.
pub fn qini(scores: &[f64], treated: &[bool], y: &[f64]) -> Result<(UpliftCurve, f64), MetricError> {
    curve_metric(CurveKind::Qini, scores, treated, y)
}

/// Normalized AUUC coefficient and curve.
pub fn auuc(scores: &[f64], treated: &[bool], y: &[f64]) -> Result<(UpliftCurve, f64), MetricError> {
    curve_metric(CurveKind::Auuc, scores, treated, y)
}

/// Min-max normalizes continuous labels to [0, 1] for metric computation.
pub fn continuous_adapt(y: &[f64]) -> Result<Vec<f64>, MetricError> {
    if y.is_empty() {
        return Err(MetricError::Invalid("empty labels".into()));
    }
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min.is_finite() && max.is_finite()) {
        return Err(MetricError::Invalid("non-finite label".into()));
    }
    if max <= min {
        return Err(MetricError::ConstantLabels);
    }
    Ok(y.iter().map(|v| (v - min) / (max - min)).collect())
}

/// Qini on continuous labels: normalize, then evaluate with the adapted
/// perfect curve.
pub fn qini_continuous(
    scores: &[f64],
    treated: &[bool],
    y: &[f64],
) -> Result<(UpliftCurve, f64), MetricError> {
    let norm = continuous_adapt(y)?;
    curve_metric(CurveKind::Qini, scores, treated, &norm)
}

/// AUUC on continuous labels.
pub fn auuc_continuous(
    scores: &[f64],
    treated: &[bool],
    y: &[f64],
) -> Result<(UpliftCurve, f64), MetricError> {
    let norm = continuous_adapt(y)?;
    curve_metric(CurveKind::Auuc, scores, treated, &norm)
}

fn curve_metric(
    kind: CurveKind,
    scores: &[f64],
    treated: &[bool],
    y: &[f64],
) -> Result<(UpliftCurve, f64), MetricError> {
    let n = scores.len();
    if n == 0 || treated.len() != n || y.len() != n {
        return Err(MetricError::Invalid(format!(
            "scores/treated/labels lengths {}/{}/{} must match and be nonzero",
            scores.len(),
            treated.len(),
            y.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::Invalid("NaN score".into()));
    }
    let n_treated = treated.iter().filter(|&&t| t).count();
    if n_treated == 0 || n_treated == n {
        return Err(MetricError::OneGroupOnly);
    }

    let model_order = ranked_by_score(scores);
    let values = curve_values(kind, &model_order, treated, y);
    let area_model = trapezoid_area(&values);

    let final_value = *values.last().expect("nonempty");
    let area_random = final_value / 2.0;

    let perfect = perfect_order(treated, y);
    let perfect_values = curve_values(kind, &perfect, treated, y);
    let area_perfect = trapezoid_area(&perfect_values);

    let denom = area_perfect - area_random;
    if denom.abs() < 1e-12 {
        return Err(MetricError::DegenerateNormalizer);
    }
    let coefficient = (area_model - area_random) / denom;

    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    for (i, v) in values.iter().enumerate() {
        points.push(((i + 1) as f64 / n as f64, *v));
    }
    Ok((
        UpliftCurve {
            points,
            area_model,
            area_random,
            area_perfect,
        },
        coefficient,
    ))
}

/// Indices sorted by score descending; stable, so ties keep input order.
fn ranked_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("no NaN scores"));
    order
}

/// Perfect ordering: treated by label descending, then control by label
/// ascending (stable within ties).
fn perfect_order(treated: &[bool], y: &[f64]) -> Vec<usize> {
    let mut treated_idx: Vec<usize> = (0..y.len()).filter(|&i| treated[i]).collect();
    let mut control_idx: Vec<usize> = (0..y.len()).filter(|&i| !treated[i]).collect();
    treated_idx.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).expect("finite labels"));
    control_idx.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("finite labels"));
    treated_idx.into_iter().chain(control_idx).collect()
}

/// Curve values at prefix sizes 1..=n for a given ordering.
fn curve_values(kind: CurveKind, order: &[usize], treated: &[bool], y: &[f64]) -> Vec<f64> {
    let n = order.len();

    // Group means at the first rank where each group appears, carried into
    // the prefixes where that group is still empty.
    let first_mean = |want: bool| -> f64 {
        order
            .iter()
            .find(|&&i| treated[i] == want)
            .map(|&i| y[i])
            .expect("both groups nonempty")
    };
    let carry_treated_mean = first_mean(true);
    let carry_control_mean = first_mean(false);

    let mut yt = 0.0;
    let mut yc = 0.0;
    let mut nt = 0usize;
    let mut nc = 0usize;
    let mut out = Vec::with_capacity(n);
    for (rank, &i) in order.iter().enumerate() {
        if treated[i] {
            nt += 1;
            yt += y[i];
        } else {
            nc += 1;
            yc += y[i];
        }
        let value = match kind {
            CurveKind::Qini => {
                if nc == 0 {
                    // no control mass yet: the subtrahend is zero
                    yt
                } else {
                    yt - yc * nt as f64 / nc as f64
                }
            }
            CurveKind::Auuc => {
                let mt = if nt == 0 { carry_treated_mean } else { yt / nt as f64 };
                let mc = if nc == 0 { carry_control_mean } else { yc / nc as f64 };
                (mt - mc) * (rank + 1) as f64
            }
        };
        out.push(value);
    }
    out
}

/// Trapezoid rule over uniform prefix steps of width 1/n, with an implicit
/// leading zero point.
fn trapezoid_area(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut prev = 0.0;
    let mut area = 0.0;
    for &v in values {
        area += (prev + v) / 2.0;
        prev = v;
    }
    area / n
}
