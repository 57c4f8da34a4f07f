//! Uplift ranking evaluation: qini and AUUC curves, normalized coefficients,
//! the continuous-label adaptation, and curve export.
//!
//! Multi-treatment evaluation runs one treatment at a time against the
//! shared control group; the report type carries the treatment index for
//! that reason. All functions here are pure.

mod curve;
mod export;

pub use curve::{
    auuc, auuc_continuous, continuous_adapt, qini, qini_continuous, CurveKind, UpliftCurve,
};
pub use export::{export_curve, parse_curve, MetricReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric needs both treated and control instances")]
    OneGroupOnly,
    #[error("labels are constant; continuous adaptation has zero range")]
    ConstantLabels,
    #[error("perfect and random curves coincide; coefficient undefined")]
    DegenerateNormalizer,
    #[error("invalid metric input: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}
