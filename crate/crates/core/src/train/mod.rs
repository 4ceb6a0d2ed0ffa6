//! Losses, AdamW, the epoch loop with early stopping, masked-imputation
//! pretraining, supervised fitting and grid search.

pub mod adamw;
pub mod config;
pub mod fit;
pub mod grid;
pub mod loss;

pub use adamw::AdamW;
pub use config::{Phase, TrainConfig};
pub use fit::{
    fit_classifier, pretrain, train_epoch, ClassifyObjective, EpochRecord, Example, FitResult, ImputeObjective,
    Objective,
};
pub use grid::{grid_search, GridOutcome, GridSpec};
pub use loss::{cross_entropy_loss, mamse_batch, mamse_loss};

use thiserror::Error;

use crate::model::ModelError;
use crate::nn::NnError;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("label {0} outside the class range")]
    BadLabel(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parameter {0} has no gradient")]
    NoGradient(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("empty grid")]
    EmptyGrid,
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Model(ModelError::Nn(e))
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;
