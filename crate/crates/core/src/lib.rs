//! Heterogeneous multi-treatment uplift modeling.
//!
//! The crate trains a hybrid uplift model (per-treatment causal-effect
//! branches with target-attention feature selection, expert gating, and a
//! KL-constrained joint loss) and runs the downstream decision stage
//! (relative uplift, per-user value weights, threshold enablement). A
//! synthetic randomized-trial generator with stored ground-truth effects
//! makes everything verifiable at desk scale.

pub mod data;
pub mod ddm;
pub mod hum;
pub mod metrics;
pub mod nn;
