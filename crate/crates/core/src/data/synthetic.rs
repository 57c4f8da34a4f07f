//! Synthetic randomized-trial generator with stored ground-truth effects.
//!
//! The generated world is heterogeneous by construction: a categorical
//! feature splits users into two halves with opposite effect signs, and for
//! any half each treatment helps one response while hurting another
//! (neighboring treatment/response pairs alternate sign). Effect magnitude
//! varies smoothly with a continuous feature, so rankings are recoverable
//! but not linearly trivial.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::schema::{DatasetSchema, FeatureKind, FeatureSpec, ResponseKind, ResponseSpec};
use crate::data::{encode_rows, fit_boundaries, DataError, FeatureValue, Instance, RawRow};

pub const NUM_CATEGORICAL: usize = 5;
pub const NUM_CONTINUOUS: usize = 5;
pub const CATEGORICAL_CARDINALITY: usize = 20;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n: usize,
    pub treatments: usize,
    pub responses: usize,
    pub seed: u64,
    pub noise_sd: f64,
    /// Bin count for the generated continuous features.
    pub bins: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            treatments: 2,
            responses: 2,
            seed: 0,
            noise_sd: 0.5,
            bins: 100,
        }
    }
}

/// Ground truth per generated instance: baseline response and the effect of
/// every treatment on every response. Consumed only by oracles and policy
/// evaluation, never by models.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    /// `mu[i][r]`
    pub mu: Vec<Vec<f64>>,
    /// `tau[i][k-1][r]` for treatment `k` in `1..=K`
    pub tau: Vec<Vec<Vec<f64>>>,
}

impl SyntheticTruth {
    /// Effect of treatment `k` (1-based) on response `r` (0-based).
    pub fn tau(&self, i: usize, k: usize, r: usize) -> f64 {
        self.tau[i][k - 1][r]
    }

    pub fn mu(&self, i: usize, r: usize) -> f64 {
        self.mu[i][r]
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticRct {
    pub schema: DatasetSchema,
    pub raw: Vec<RawRow>,
    pub instances: Vec<Instance>,
    pub truth: SyntheticTruth,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates an RCT: treatments assigned uniformly at random over `0..=K`,
/// responses `y_ir = mu_r(x) + tau_r^{t_i}(x) + noise`. Instances come back
/// already encoded (bins fitted on the full generated population, which is
/// part of the world definition; file-based pipelines re-fit on their
/// training split).
pub fn generate_synthetic_rct(cfg: &SyntheticConfig) -> Result<SyntheticRct, DataError> {
    if cfg.n < 1 || cfg.treatments < 1 || cfg.responses < 1 {
        return Err(DataError::Invalid(
            "synthetic generator requires n >= 1, treatments >= 1, responses >= 1".into(),
        ));
    }
    let k_total = cfg.treatments;
    let r_total = cfg.responses;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    // World coefficients, drawn once per seed.
    let f_total = NUM_CATEGORICAL + NUM_CONTINUOUS;
    let alpha: Vec<Vec<f64>> = (0..r_total)
        .map(|_| (0..f_total).map(|_| rng.gen_range(-0.3..0.3)).collect())
        .collect();
    let beta: Vec<f64> = (0..r_total).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let base_mag: Vec<Vec<f64>> = (0..k_total)
        .map(|_| (0..r_total).map(|_| rng.gen_range(0.8..1.6)).collect())
        .collect();

    let mut raw = Vec::with_capacity(cfg.n);
    let mut mu_all = Vec::with_capacity(cfg.n);
    let mut tau_all = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let cats: Vec<usize> = (0..NUM_CATEGORICAL)
            .map(|_| rng.gen_range(0..CATEGORICAL_CARDINALITY))
            .collect();
        let conts: Vec<f64> = (0..NUM_CONTINUOUS).map(|_| rng.gen::<f64>()).collect();
        let t = rng.gen_range(0..=k_total);

        // Normalized feature view used by the baseline.
        let norm: Vec<f64> = cats
            .iter()
            .map(|&c| c as f64 / (CATEGORICAL_CARDINALITY - 1) as f64)
            .chain(conts.iter().cloned())
            .collect();

        let sign = if cats[0] < CATEGORICAL_CARDINALITY / 2 { 1.0 } else { -1.0 };
        let gate = logistic(6.0 * (conts[0] - 0.5));

        let mut mu = Vec::with_capacity(r_total);
        for r in 0..r_total {
            let lin: f64 = alpha[r].iter().zip(&norm).map(|(a, x)| a * x).sum();
            mu.push(5.0 + lin + beta[r] * norm[0] * conts[1]);
        }
        let tau: Vec<Vec<f64>> = (0..k_total)
            .map(|k0| {
                (0..r_total)
                    .map(|r0| {
                        let parity = if (k0 + r0) % 2 == 0 { 1.0 } else { -1.0 };
                        sign * parity * base_mag[k0][r0] * gate
                    })
                    .collect()
            })
            .collect();

        let mut y = Vec::with_capacity(r_total);
        for r in 0..r_total {
            let effect = if t >= 1 { tau[t - 1][r] } else { 0.0 };
            let eps = noise.sample(&mut rng) * cfg.noise_sd;
            y.push(mu[r] + effect + eps);
        }

        raw.push(RawRow {
            user_id: format!("u{i:07}"),
            values: cats
                .iter()
                .map(|&c| FeatureValue::Categorical(c))
                .chain(conts.iter().map(|&v| FeatureValue::Continuous(v)))
                .collect(),
            t,
            y,
        });
        mu_all.push(mu);
        tau_all.push(tau);
    }

    let mut schema = synthetic_schema(k_total, r_total, cfg.bins);
    fit_boundaries(&raw, &mut schema)?;
    let instances = encode_rows(&raw, &schema)?;
    Ok(SyntheticRct {
        schema,
        raw,
        instances,
        truth: SyntheticTruth { mu: mu_all, tau: tau_all },
    })
}

pub fn synthetic_schema(treatments: usize, responses: usize, bins: usize) -> DatasetSchema {
    let mut features = Vec::with_capacity(NUM_CATEGORICAL + NUM_CONTINUOUS);
    for j in 0..NUM_CATEGORICAL {
        features.push(FeatureSpec {
            name: format!("cat_{j}"),
            kind: FeatureKind::Categorical { cardinality: CATEGORICAL_CARDINALITY },
        });
    }
    for j in 0..NUM_CONTINUOUS {
        features.push(FeatureSpec {
            name: format!("cont_{j}"),
            kind: FeatureKind::Continuous { bins, boundaries: None },
        });
    }
    DatasetSchema {
        features,
        treatments,
        responses: (1..=responses)
            .map(|r| ResponseSpec {
                name: format!("response_{r}"),
                kind: ResponseKind::Continuous,
            })
            .collect(),
    }
}

/// Truth sidecar: `user_id,r,k,tau` with 1-based response and treatment
/// indices, one row per (instance, response, treatment).
pub fn write_truth_csv(path: &Path, rct: &SyntheticRct) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "user_id,r,k,tau")?;
    for (i, row) in rct.raw.iter().enumerate() {
        for r in 0..rct.schema.num_responses() {
            for k in 1..=rct.schema.treatments {
                writeln!(w, "{},{},{},{}", row.user_id, r + 1, k, rct.truth.tau(i, k, r))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
