//! `gen-data`: synthetic dataset, schema, truth sidecar, and request log.

use anyhow::Result;
use hmum_core::data::{generate_synthetic_rct, write_raw_csv, write_truth_csv};
use hmum_core::ddm::{synthetic_requests, RequestSimConfig};

use crate::config::RunConfig;

#[derive(Debug)]
pub struct GenSummary {
    pub instances: usize,
    pub requests: usize,
}

pub fn cmd_gen_data(cfg: &RunConfig) -> Result<GenSummary> {
    cfg.write_resolved()?;
    let rct = generate_synthetic_rct(&cfg.synthetic_config())?;

    // The written schema declares kinds only; loaders fit bin boundaries on
    // their own training split.
    let mut schema = rct.schema.clone();
    for f in &mut schema.features {
        if let hmum_core::data::FeatureKind::Continuous { boundaries, .. } = &mut f.kind {
            *boundaries = None;
        }
    }
    std::fs::write(cfg.out.join("schema.json"), schema.to_json())?;
    write_raw_csv(&cfg.out.join("dataset.csv"), &schema, &rct.raw)?;
    write_truth_csv(&cfg.out.join("truth.csv"), &rct)?;

    let (request_schema, requests) = synthetic_requests(
        &rct,
        &RequestSimConfig {
            videos_per_request: cfg.videos_per_request,
            seed: cfg.seed.wrapping_add(500),
        },
    );
    crate::requests::write_request_schema(&cfg.out.join("request_schema.json"), &request_schema)?;
    crate::requests::write_requests_jsonl(&cfg.out.join("requests.jsonl"), &requests)?;

    log::info!(
        "generated {} instances and {} requests under {}",
        rct.raw.len(),
        requests.len(),
        cfg.out.display()
    );
    Ok(GenSummary {
        instances: rct.raw.len(),
        requests: requests.len(),
    })
}
