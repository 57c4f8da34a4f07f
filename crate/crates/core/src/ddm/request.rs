//! Request-level context: pooled item features, proportion labels, and the
//! synthetic request simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureValue, SyntheticRct};
use crate::ddm::weight_model::WeightModel;
use crate::ddm::DdmError;

/// Declares the id space of every item group and the response count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSchema {
    pub group_cardinalities: Vec<usize>,
    pub responses: usize,
}

/// One user request: per-group candidate/context item ids plus the exposure
/// log used for label building (per exposed video, one ranking percentile
/// per response).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestContext {
    pub user_id: String,
    pub groups: Vec<Vec<usize>>,
    pub exposures: Vec<Vec<f64>>,
}

/// Average-pools each group's item embeddings and concatenates the pooled
/// vectors in group order. Length is `groups * embed_dim`.
pub fn pool_request(model: &WeightModel, context: &RequestContext) -> Result<Vec<f64>, DdmError> {
    model.pooled_input(context)
}

/// Classifies each exposed video by its best-ranked response (highest
/// percentile wins, ties to the lowest response index) and returns the
/// per-response proportions. `None` when the exposure log is empty — callers
/// skip the sample and keep a counter.
pub fn proportion_label(exposures: &[Vec<f64>], responses: usize) -> Option<Vec<f64>> {
    if exposures.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; responses];
    for video in exposures {
        debug_assert_eq!(video.len(), responses);
        let mut best = 0usize;
        for r in 1..responses.min(video.len()) {
            if video[r] > video[best] {
                best = r;
            }
        }
        counts[best] += 1;
    }
    let total = exposures.len() as f64;
    Some(counts.iter().map(|&c| c as f64 / total).collect())
}

#[derive(Debug, Clone)]
pub struct RequestSimConfig {
    pub videos_per_request: usize,
    pub seed: u64,
}

impl Default for RequestSimConfig {
    fn default() -> Self {
        Self {
            videos_per_request: 20,
            seed: 0,
        }
    }
}

/// Builds one synthetic request per generated user.
///
/// Item groups are stand-ins for real request features: group 0 carries the
/// user's context neighborhood, group 1 encodes the preference half the user
/// belongs to, group 2 buckets a continuous feature. Exposure percentiles
/// are drawn over the request's own candidate pool so that each video's
/// winning response follows the user's latent preference; the proportion
/// label therefore approximates that preference with V-sample noise.
pub fn synthetic_requests(
    rct: &SyntheticRct,
    cfg: &RequestSimConfig,
) -> (RequestSchema, Vec<RequestContext>) {
    let responses = rct.schema.num_responses();
    let schema = RequestSchema {
        group_cardinalities: vec![20, 40, 30],
        responses,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut requests = Vec::with_capacity(rct.raw.len());
    for row in &rct.raw {
        let c0 = match row.values[0] {
            FeatureValue::Categorical(c) => c,
            _ => 0,
        };
        // Response preference hangs off a different feature than the effect
        // sign, so no whole-population policy can satisfy everyone.
        let c1 = match row.values[1] {
            FeatureValue::Categorical(c) => c,
            _ => 0,
        };
        let u2 = match row.values[7] {
            FeatureValue::Continuous(v) => v,
            _ => 0.5,
        };
        let preferred_half = c1 < 10;

        let context_items: Vec<usize> = (0..3)
            .map(|_| {
                let jitter: i64 = rng.gen_range(-1..=1);
                (c0 as i64 + jitter).clamp(0, 19) as usize
            })
            .collect();
        let interaction_len = rng.gen_range(2..=5);
        let interaction_items: Vec<usize> = (0..interaction_len)
            .map(|_| if preferred_half { 0 } else { 20 } + rng.gen_range(0..20))
            .collect();
        let candidate_items: Vec<usize> = (0..4)
            .map(|_| {
                let base = (u2 * 29.999) as usize;
                (base + rng.gen_range(0..3)).min(29)
            })
            .collect();

        // Latent preference: one response dominates per half, jittered.
        let favored = if preferred_half { 0 } else { responses - 1 };
        let strength: f64 = (0.5 + rng.gen_range(-0.1..0.1f64)).clamp(0.05, 0.95);
        let pref: Vec<f64> = (0..responses)
            .map(|r| (1.0 - strength) / responses as f64 + if r == favored { strength } else { 0.0 })
            .collect();

        let exposures: Vec<Vec<f64>> = (0..cfg.videos_per_request)
            .map(|_| {
                let draw: f64 = rng.gen();
                let mut acc = 0.0;
                let mut winner = responses - 1;
                for (r, p) in pref.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        winner = r;
                        break;
                    }
                }
                (0..responses)
                    .map(|r| {
                        if r == winner {
                            rng.gen_range(0.62..1.0)
                        } else {
                            rng.gen_range(0.0..0.58)
                        }
                    })
                    .collect()
            })
            .collect();

        requests.push(RequestContext {
            user_id: row.user_id.clone(),
            groups: vec![context_items, interaction_items, candidate_items],
            exposures,
        });
    }
    (schema, requests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_rct, SyntheticConfig};
    use approx::assert_relative_eq;

    #[test]
    fn proportion_label_counts_types() {
        // 10 videos: 7 where response 1 ranks best, 3 where response 2 does.
        let mut exposures = Vec::new();
        for _ in 0..7 {
            exposures.push(vec![0.9, 0.1]);
        }
        for _ in 0..3 {
            exposures.push(vec![0.2, 0.8]);
        }
        assert_eq!(proportion_label(&exposures, 2).unwrap(), vec![0.7, 0.3]);
    }

    #[test]
    fn one_type_gives_one_hot() {
        let exposures = vec![vec![0.9, 0.3]; 5];
        assert_eq!(proportion_label(&exposures, 2).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let exposures = vec![vec![0.5, 0.5]];
        assert_eq!(proportion_label(&exposures, 2).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn labels_sum_to_one() {
        let exposures = vec![vec![0.1, 0.9], vec![0.8, 0.2], vec![0.4, 0.6]];
        let label = proportion_label(&exposures, 2).unwrap();
        assert_relative_eq!(label.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_exposures_are_skipped() {
        assert!(proportion_label(&[], 2).is_none());
    }

    #[test]
    fn simulator_is_deterministic_and_in_range() {
        let rct = generate_synthetic_rct(&SyntheticConfig {
            n: 100,
            seed: 6,
            bins: 8,
            ..Default::default()
        })
        .unwrap();
        let cfg = RequestSimConfig { videos_per_request: 12, seed: 5 };
        let (schema_a, reqs_a) = synthetic_requests(&rct, &cfg);
        let (_, reqs_b) = synthetic_requests(&rct, &cfg);
        assert_eq!(reqs_a, reqs_b);
        for req in &reqs_a {
            assert_eq!(req.groups.len(), schema_a.group_cardinalities.len());
            for (group, &card) in req.groups.iter().zip(&schema_a.group_cardinalities) {
                assert!(!group.is_empty());
                assert!(group.iter().all(|&id| id < card));
            }
            assert_eq!(req.exposures.len(), 12);
            for video in &req.exposures {
                assert!(video.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }

    #[test]
    fn labels_track_the_preference_halves() {
        let rct = generate_synthetic_rct(&SyntheticConfig {
            n: 600,
            seed: 7,
            bins: 8,
            ..Default::default()
        })
        .unwrap();
        let (_, reqs) = synthetic_requests(&rct, &RequestSimConfig::default());
        let mut low = Vec::new();
        let mut high = Vec::new();
        for (row, req) in rct.raw.iter().zip(&reqs) {
            let label = proportion_label(&req.exposures, 2).unwrap();
            match row.values[1] {
                FeatureValue::Categorical(c) if c < 10 => low.push(label[0]),
                _ => high.push(label[0]),
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&low) > 0.6, "low half mean {}", mean(&low));
        assert!(mean(&high) < 0.4, "high half mean {}", mean(&high));
    }
}
