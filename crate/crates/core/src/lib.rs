//! Multi-atlas transformer ensemble for connectome classification.
//!
//! The crate covers the whole pipeline: functional-connectivity features from
//! ROI time series ([`data`]), a small dense-tensor engine with hand-written
//! backward passes ([`nn`]), single-atlas transformers and their three-atlas
//! ensemble ([`model`]), masked-imputation pretraining and supervised
//! fine-tuning ([`train`]), and a stratified cross-validation harness
//! ([`eval`]). The [`cli`] module binds them into the `metaformer` binary.

pub mod cli;
pub mod data;
pub mod eval;
pub mod model;
pub mod nn;
pub mod par;
pub mod seed;
pub mod train;
