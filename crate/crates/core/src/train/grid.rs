use serde::{Deserialize, Serialize};

use super::{Result, TrainConfig, TrainError};
use crate::par;
use crate::seed;

/// Hyperparameter grid; points are enumerated learning-rate-major, then
/// weight decay, then dropout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub dropout_rates: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            learning_rates: vec![1e-3, 1e-4, 1e-5],
            weight_decays: vec![1e-2, 1e-4, 0.0],
            dropout_rates: vec![0.1, 0.3, 0.5],
        }
    }
}

impl GridSpec {
    /// A one-point grid holding the template's own values.
    pub fn single(cfg: &TrainConfig) -> Self {
        Self {
            learning_rates: vec![cfg.learning_rate],
            weight_decays: vec![cfg.weight_decay],
            dropout_rates: vec![cfg.dropout_rate],
        }
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.weight_decays.len() * self.dropout_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Configs for every grid point; point `i` gets seed
    /// `derive(template.seed, "grid", i)`.
    pub fn points(&self, template: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &lr in &self.learning_rates {
            for &wd in &self.weight_decays {
                for &dr in &self.dropout_rates {
                    let i = out.len() as u64;
                    out.push(TrainConfig {
                        learning_rate: lr,
                        weight_decay: wd,
                        dropout_rate: dr,
                        seed: seed::derive(template.seed, "grid", i),
                        ..template.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best: TrainConfig,
    /// Validation loss per grid point, in enumeration order.
    pub scores: Vec<f64>,
}

/// Evaluates every grid point with `run` (which returns the best validation
/// loss) and picks the lowest; ties go to the earliest point. Points may run
/// concurrently; selection depends only on the indexed scores.
pub fn grid_search<F>(grid: &GridSpec, template: &TrainConfig, run: F) -> Result<GridOutcome>
where
    F: Fn(&TrainConfig) -> Result<f64> + Sync + Send,
{
    if grid.is_empty() {
        return Err(TrainError::EmptyGrid);
    }
    let points = grid.points(template);
    let scores = par::map_indexed(points.len(), |i| run(&points[i]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut best_index = 0;
    for (i, &s) in scores.iter().enumerate() {
        let cur = scores[best_index];
        if s < cur || (cur.is_nan() && !s.is_nan()) {
            best_index = i;
        }
    }
    Ok(GridOutcome {
        best_index,
        best: points[best_index].clone(),
        scores,
    })
}
