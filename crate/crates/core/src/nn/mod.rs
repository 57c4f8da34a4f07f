//! Minimal differentiable computation kernel.
//!
//! Everything the uplift and value-weight networks need, in 64-bit floats
//! and deterministic given a seed: dense layers, embedding lookups, softmax,
//! KL divergence, squared error, reverse-mode gradients, Adam, and
//! reduce-on-plateau scheduling. Training is single-threaded per model;
//! forward passes on frozen parameters are read-only and safe to run from
//! many threads.

mod check;
mod graph;
mod math;
mod optim;
mod params;
mod tensor;

pub use check::{finite_difference_check, GradCheckReport};
pub use graph::{dense_forward, Activation, Graph, NodeId};
pub use math::{kl_divergence, mse, softmax, KL_EPSILON};
pub use optim::{plateau_update, Adam, PlateauSchedule};
pub use params::{ParamId, ParamStore, ParamTensor};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: dimension error: {detail}")]
    Dimension { op: &'static str, detail: String },
    #[error("state error: {0}")]
    State(String),
    #[error("non-finite {what} in parameter `{name}`")]
    NonFinite { what: &'static str, name: String },
    #[error("id {id} out of range for table `{name}` with {rows} rows")]
    IndexOutOfRange { name: String, id: usize, rows: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
