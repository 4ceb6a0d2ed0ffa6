use serde::{Deserialize, Serialize};

use super::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
    Scratch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout_rate: f64,
    pub p_aug: f64,
    pub noise_sigma: f64,
    pub mask_ratio: f64,
    pub seed: u64,
    pub phase: Phase,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 750,
            batch_size: 256,
            patience: 40,
            learning_rate: 1e-4,
            weight_decay: 1e-2,
            dropout_rate: 0.1,
            p_aug: 0.3,
            noise_sigma: 0.01,
            mask_ratio: 0.1,
            seed: 0,
            phase: Phase::Scratch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if self.patience >= self.max_epochs {
            return fail(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(format!("learning_rate {} must be >= 0", self.learning_rate));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return fail(format!("weight_decay {} must be >= 0", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(0.0..=1.0).contains(&self.p_aug) {
            return fail(format!("p_aug {} outside [0, 1]", self.p_aug));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return fail(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return fail(format!("mask_ratio {} outside (0, 1)", self.mask_ratio));
        }
        Ok(())
    }

    pub fn with_phase(&self, phase: Phase) -> Self {
        Self {
            phase,
            ..self.clone()
        }
    }
}
