use serde::{Deserialize, Serialize};

use super::{DataError, Result};

/// A brain parcellation with `k` regions of interest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtlasSpec {
    pub name: String,
    pub k: usize,
}

impl AtlasSpec {
    pub fn new(name: impl Into<String>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(DataError::InvalidConfig {
                field: "k",
                message: format!("an atlas needs at least 2 ROIs, got {k}"),
            });
        }
        Ok(Self { name: name.into(), k })
    }

    pub fn aal() -> Self {
        Self { name: "AAL".into(), k: 116 }
    }

    pub fn cc200() -> Self {
        Self { name: "CC200".into(), k: 200 }
    }

    pub fn dos160() -> Self {
        Self { name: "DOS160".into(), k: 160 }
    }

    /// AAL, CC200 and DOS160, in ensemble order.
    pub fn builtin() -> [Self; 3] {
        [Self::aal(), Self::cc200(), Self::dos160()]
    }

    /// Length of the strict lower triangle, `k(k-1)/2`.
    pub fn feature_len(&self) -> usize {
        self.k * (self.k - 1) / 2
    }
}
