use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::data::AtlasSpec;

/// Architecture of one single-atlas transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatConfig {
    pub atlas: AtlasSpec,
    pub d_model: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub n_heads: usize,
    pub dropout_rate: f64,
}

impl SatConfig {
    /// d_model 256, two layers, d_ff 128, four heads.
    pub fn standard(atlas: AtlasSpec, dropout_rate: f64) -> Self {
        Self {
            atlas,
            d_model: 256,
            n_layers: 2,
            d_ff: 128,
            n_heads: 4,
            dropout_rate,
        }
    }

    pub fn input_len(&self) -> usize {
        self.atlas.feature_len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.d_ff == 0 || self.n_heads == 0 {
            return Err(ModelError::InvalidConfig("dimensions must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "n_heads {} does not divide d_model {}",
                self.n_heads, self.d_model
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Classification-mode parameter count in closed form.
    pub fn classify_param_count(&self) -> usize {
        let (n, d, f) = (self.input_len(), self.d_model, self.d_ff);
        let embed = n * d + d;
        let layer = 4 * d * d + 4 * d + d * f + f + f * d + d + 2 * (2 * d);
        embed + self.n_layers * layer + d * 2 + 2
    }
}

/// Model config file: shared architecture plus the atlas list. Missing
/// fields take the standard values; an empty atlas list means "use the
/// atlases of the data".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub n_heads: usize,
    pub dropout: f64,
    pub atlases: Vec<AtlasSpec>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::standard(Vec::new(), 0.1)
    }
}

impl ModelConfig {
    pub fn standard(atlases: Vec<AtlasSpec>, dropout: f64) -> Self {
        Self {
            d_model: 256,
            n_layers: 2,
            d_ff: 128,
            n_heads: 4,
            dropout,
            atlases,
        }
    }

    pub fn sat_config(&self, atlas_index: usize) -> SatConfig {
        SatConfig {
            atlas: self.atlases[atlas_index].clone(),
            d_model: self.d_model,
            n_layers: self.n_layers,
            d_ff: self.d_ff,
            n_heads: self.n_heads,
            dropout_rate: self.dropout,
        }
    }

    pub fn sat_configs(&self) -> Vec<SatConfig> {
        (0..self.atlases.len()).map(|i| self.sat_config(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.atlases.is_empty() {
            return Err(ModelError::InvalidConfig("no atlases".into()));
        }
        self.sat_configs().iter().try_for_each(SatConfig::validate)
    }
}
