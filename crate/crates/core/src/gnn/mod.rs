//! Two-layer graph networks with an optional learnable perturbation of the
//! filter's dominant eigenvalues.

mod filter;
mod model;
mod train;

use thiserror::Error;

use crate::linalg::LinalgError;

pub use filter::{
    build_filter_chebyshev, build_filter_poly, build_filter_sna, chebyshev_basis, normalized_laplacian,
    perturb_basis, poly_filter, FilterKind, FilterMatrix,
};
pub use model::{
    forward, hidden_preactivation, loss_and_gradients, output_loss, softmax_rows, Architecture,
    DropoutMasks, GnnModel, Gradients, Layer, Objective, PerturbationDelta, Propagator, Targets,
};
pub use train::{
    accuracy, evaluate, train_two_stage, Metrics, Schedule, Split, StageConfig, TrainReport,
    DIVERGENCE_LOSS,
};

#[derive(Debug, Clone, Error)]
pub enum GnnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values produced in {layer}")]
    NonFinite { layer: String },

    #[error("training diverged in stage {stage} at epoch {epoch} (loss {loss:e})")]
    Diverged {
        stage: usize,
        epoch: usize,
        loss: f64,
        report: Box<TrainReport>,
    },

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
