//! Single-atlas transformers (SAT) and the three-atlas ensemble.

pub mod config;
pub mod ensemble;
pub mod sat;

pub use config::{ModelConfig, SatConfig};
pub use ensemble::AtlasEnsemble;
pub use sat::{HeadMode, SatCache, SingleAtlasTransformer};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("input length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{expected:?} head absent: model is in {actual:?} mode")]
    HeadAbsent { expected: HeadMode, actual: HeadMode },
    #[error("atlas order mismatch at position {position}: expected {expected} features, got {got}")]
    AtlasOrderMismatch {
        position: usize,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} atlas inputs, got {got}")]
    ViewCount { expected: usize, got: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
