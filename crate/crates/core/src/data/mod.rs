//! Dataset schema, CSV ingestion, discretization, splitting, and the
//! synthetic randomized-trial generator.

mod discretize;
mod io;
mod schema;
mod split;
mod synthetic;

pub use discretize::{bin_index, discretize_fit};
pub use io::{encode_rows, fit_boundaries, load_csv, read_raw_csv, write_raw_csv};
pub use schema::{DatasetSchema, FeatureKind, FeatureSpec, ResponseKind, ResponseSpec};
pub use split::split;
pub use synthetic::{
    generate_synthetic_rct, write_truth_csv, SyntheticConfig, SyntheticRct, SyntheticTruth,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}: {detail}")]
    Parse { row: usize, detail: String },
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Raw feature cell before encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Categorical(usize),
    Continuous(f64),
}

/// One record as parsed from disk or produced by the generator, before
/// continuous features are discretized.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub user_id: String,
    pub values: Vec<FeatureValue>,
    pub t: usize,
    pub y: Vec<f64>,
}

/// One encoded record: every feature is a categorical id within its declared
/// cardinality, `t = 0` means control, and `y` holds one value per response.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub user_id: String,
    pub x: Vec<usize>,
    pub t: usize,
    pub y: Vec<f64>,
}
