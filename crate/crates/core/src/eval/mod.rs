//! Cross-validation protocol, classification metrics and variant reports.

pub mod experiment;
pub mod folds;
pub mod metrics;
pub mod report;

pub use experiment::{run_cv_experiment, CvOutcome, ExperimentConfig, LeakageAudit, Variant};
pub use folds::{fold_fingerprint, stratified_kfold, train_val_split, FoldAssignment};
pub use metrics::{accuracy, auc, f1, precision, recall, Confusion, MetricSet};
pub use report::{fold_csv, read_fold_csv, render_table, summary_csv, CvReport, METRIC_NAMES};

use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class} has {count} members, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("split produced an empty {0} set")]
    EmptyResult(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("recall is undefined without positive labels")]
    NoPositives,
    #[error("AUC needs both classes, got only class {0}")]
    OneClassOnly(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("test indices leaked into {0}")]
    Leakage(String),
    #[error("report parse error: {0}")]
    Report(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
