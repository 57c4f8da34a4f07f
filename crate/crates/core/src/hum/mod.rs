//! Offline hybrid uplift model: feature selection, expert-gated branch
//! towers, the masked joint loss, training, counterfactual inference, and
//! checkpointing. One model instance covers one response channel; response
//! models are independent and may be trained as separate jobs. A frozen
//! model is safe for concurrent reads.

mod checkpoint;
mod infer;
mod loss;
mod model;
mod train;

pub use checkpoint::CHECKPOINT_VERSION;
pub use infer::{infer_all_treatments, infer_batch, UpliftEstimates};
pub use loss::hum_loss;
pub use model::{fuse, BranchPath, HumConfig, HumModel};
pub use train::{evaluation_loss, gradient_check, perturb_parameters, train, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HumError {
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("branch {branch} out of range [1, {treatments}]")]
    InvalidBranch { branch: usize, treatments: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
