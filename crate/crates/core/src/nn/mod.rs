//! Dense tensors, neural layers with explicit backward passes, parameter
//! initialization, a finite-difference gradient checker and the weight
//! checkpoint container.
//!
//! Every layer follows the same pattern: `forward` returns the output plus a
//! cache of whatever the backward pass needs; `backward` consumes that cache
//! and the upstream gradient, accumulates parameter gradients in place and
//! returns the gradient w.r.t. the layer input. A model's forward pass keeps
//! its caches in execution order and its backward pass replays them in
//! reverse.

pub mod activation;
pub mod attention;
pub mod checkpoint;
pub mod dropout;
pub mod encoder;
pub mod gradcheck;
pub mod init;
pub mod kernels;
pub mod linear;
pub mod norm;
pub mod param;
pub mod tensor;

pub use activation::{gelu, gelu_backward, softmax_backward, softmax_rows};
pub use attention::{AttentionCache, MultiHeadAttention};
pub use dropout::{dropout, dropout_backward, DropoutMask};
pub use encoder::{EncoderCache, EncoderLayer};
pub use gradcheck::grad_check;
pub use init::he_init;
pub use linear::Linear;
pub use norm::{LayerNorm, LayerNormCache};
pub use param::{ParamVisitor, Parameter};
pub use tensor::Tensor;

use thiserror::Error;

use crate::seed::SeededRng;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{0}: non-finite value produced")]
    NonFinite(&'static str),
    #[error("{0}: invalid argument")]
    InvalidArgument(&'static str),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Forward-pass mode. Training mode carries the RNG that drives dropout;
/// evaluation mode is deterministic and RNG-free.
pub enum Mode<'a> {
    Train(&'a mut SeededRng),
    Eval,
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    /// Reborrows the mode for a nested call.
    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Train(rng) => Mode::Train(rng),
            Mode::Eval => Mode::Eval,
        }
    }
}
