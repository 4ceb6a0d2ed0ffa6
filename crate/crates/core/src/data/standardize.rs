use super::{AtlasSpec, Connectome, DataError, Result};

/// Standard deviations below this are treated as degenerate and replaced
/// by 1.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Per-feature z-scoring statistics (population convention).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizerState {
    pub atlas: AtlasSpec,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: String,
}

impl StandardizerState {
    pub fn fit(connectomes: &[&Connectome], fitted_on: impl Into<String>) -> Result<Self> {
        let first = connectomes.first().ok_or(DataError::EmptyInput)?;
        if connectomes.iter().any(|c| c.atlas != first.atlas) {
            return Err(DataError::MixedAtlases);
        }
        let n = connectomes.len() as f64;
        let len = first.features.len();
        let mut mean = vec![0.0; len];
        for c in connectomes {
            for (m, x) in mean.iter_mut().zip(&c.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; len];
        for c in connectomes {
            for ((v, x), m) in var.iter_mut().zip(&c.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s < DEGENERATE_STD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Self {
            atlas: first.atlas.clone(),
            mean,
            std,
            fitted_on: fitted_on.into(),
        })
    }

    pub fn apply(&self, c: &Connectome) -> Result<Connectome> {
        if c.atlas != self.atlas {
            return Err(DataError::AtlasMismatch {
                expected: self.atlas.name.clone(),
                got: c.atlas.name.clone(),
            });
        }
        if c.standardized {
            return Err(DataError::AlreadyStandardized);
        }
        let features = c
            .features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        Ok(Connectome {
            subject_id: c.subject_id.clone(),
            atlas: c.atlas.clone(),
            features,
            standardized: true,
        })
    }
}
