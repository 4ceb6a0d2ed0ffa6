//! Connectome construction: ROI time series to Pearson functional
//! connectivity, strict-lower-triangle vectorization, fold-local
//! standardization, augmentation noise, imputation masks, file formats and
//! the synthetic cohort generator.

pub mod atlas;
pub mod corrupt;
pub mod fc;
pub mod io;
pub mod manifest;
pub mod standardize;
pub mod synth;

pub use atlas::AtlasSpec;
pub use corrupt::{apply_mask, augment_noise, sample_mask, NoiseMask};
pub use fc::{connectome_from_series, pearson_fc, vectorize_lower, Matrix};
pub use manifest::{load_manifest, SubjectDescriptor};
pub use standardize::StandardizerState;
pub use synth::{generate_synthetic, synthetic_cohort, SynthConfig};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("ROI {0} has a constant time series")]
    ConstantRoi(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("time series needs at least 2 time points, got {0}")]
    TooShort(usize),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("connectomes come from different atlases")]
    MixedAtlases,
    #[error("atlas mismatch: expected {expected}, got {got}")]
    AtlasMismatch { expected: String, got: String },
    #[error("connectome is already standardized")]
    AlreadyStandardized,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("manifest line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("duplicate subject {0}")]
    DuplicateSubject(String),
    #[error("subject {0}: missing {1} path")]
    MissingAtlasPath(String, String),
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Diagnostic class. ASD is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "TC")]
    Tc,
    #[serde(rename = "ASD")]
    Asd,
}

impl Label {
    /// Class index used by the classifiers: TC = 0, ASD = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Tc => 0,
            Label::Asd => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Tc),
            1 => Some(Label::Asd),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Tc => "TC",
            Label::Asd => "ASD",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "ASD" => Ok(Label::Asd),
            "TC" => Ok(Label::Tc),
            other => Err(format!("unknown label {other:?} (expected ASD or TC)")),
        }
    }
}

/// ROI time series, `t_len` rows by `atlas.k` columns, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiTimeSeries {
    pub subject_id: String,
    pub atlas: AtlasSpec,
    pub t_len: usize,
    pub values: Vec<f64>,
}

impl RoiTimeSeries {
    pub fn new(subject_id: impl Into<String>, atlas: AtlasSpec, t_len: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != t_len * atlas.k {
            return Err(DataError::LengthMismatch {
                expected: t_len * atlas.k,
                got: values.len(),
            });
        }
        if t_len < 2 {
            return Err(DataError::TooShort(t_len));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite);
        }
        Ok(Self {
            subject_id: subject_id.into(),
            atlas,
            t_len,
            values,
        })
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let k = self.atlas.k;
        (0..self.t_len).map(move |t| self.values[t * k + j])
    }
}

/// Flattened functional connectivity for one subject under one atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectome {
    pub subject_id: String,
    pub atlas: AtlasSpec,
    pub features: Vec<f64>,
    pub standardized: bool,
}

impl Connectome {
    pub fn new(subject_id: impl Into<String>, atlas: AtlasSpec, features: Vec<f64>) -> Result<Self> {
        if features.len() != atlas.feature_len() {
            return Err(DataError::LengthMismatch {
                expected: atlas.feature_len(),
                got: features.len(),
            });
        }
        Ok(Self {
            subject_id: subject_id.into(),
            atlas,
            features,
            standardized: false,
        })
    }
}

/// A labeled subject with one connectome per atlas, atlas-ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub subject_id: String,
    pub label: Label,
    pub connectomes: Vec<Connectome>,
}

impl Subject {
    pub fn new(subject_id: impl Into<String>, label: Label, connectomes: Vec<Connectome>) -> Result<Self> {
        let subject_id = subject_id.into();
        for (i, c) in connectomes.iter().enumerate() {
            if c.subject_id != subject_id {
                return Err(DataError::ParseError {
                    line: 0,
                    message: format!("connectome for {} attached to {subject_id}", c.subject_id),
                });
            }
            if connectomes[..i].iter().any(|o| o.atlas == c.atlas) {
                return Err(DataError::AtlasMismatch {
                    expected: "distinct atlases".into(),
                    got: c.atlas.name.clone(),
                });
            }
        }
        Ok(Self {
            subject_id,
            label,
            connectomes,
        })
    }
}

/// A cohort: atlas list plus subjects whose connectomes follow that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub atlases: Vec<AtlasSpec>,
    pub subjects: Vec<Subject>,
}

impl Cohort {
    pub fn new(atlases: Vec<AtlasSpec>, subjects: Vec<Subject>) -> Result<Self> {
        for s in &subjects {
            if s.connectomes.len() != atlases.len() {
                return Err(DataError::LengthMismatch {
                    expected: atlases.len(),
                    got: s.connectomes.len(),
                });
            }
            for (c, a) in s.connectomes.iter().zip(&atlases) {
                if &c.atlas != a {
                    return Err(DataError::AtlasMismatch {
                        expected: a.name.clone(),
                        got: c.atlas.name.clone(),
                    });
                }
            }
        }
        Ok(Self { atlases, subjects })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.subjects.iter().map(|s| s.label).collect()
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}
