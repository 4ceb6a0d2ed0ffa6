//! Synthetic cohort generator.
//!
//! Each subject's ROI signals are mixtures of latent factors shared by every
//! atlas of that subject: one factor per functional network, a global
//! signal, and two coupling factors. ASD subjects load the first coupling
//! factor on networks 0 and 1; TC subjects load the second on networks 2 and
//! 3. Coupling weights scale with `delta`, so `delta = 0` makes the classes
//! identically distributed. Loadings, global-signal strength and coupling
//! magnitude vary per subject; each atlas adds independent ROI noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fc::connectome_from_series;
use super::{AtlasSpec, Cohort, DataError, Label, Result, RoiTimeSeries, Subject};
use crate::par;
use crate::seed::{self, SeededRng};

pub const N_NETWORKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_asd: usize,
    pub n_tc: usize,
    pub atlases: Vec<AtlasSpec>,
    pub t_len: usize,
    pub delta: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, message: String| Err(DataError::InvalidConfig { field, message });
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad("delta", format!("must be finite and >= 0, got {}", self.delta));
        }
        if self.n_asd == 0 || self.n_tc == 0 {
            return bad("n_asd", "both classes need at least one subject".into());
        }
        if self.t_len < 2 {
            return bad("t_len", format!("must be >= 2, got {}", self.t_len));
        }
        if self.atlases.is_empty() {
            return bad("atlases", "at least one atlas is required".into());
        }
        for (i, a) in self.atlases.iter().enumerate() {
            if a.k < 2 {
                return bad("atlases", format!("atlas {} needs k >= 2", a.name));
            }
            if self.atlases[..i].iter().any(|b| b.name == a.name) {
                return bad("atlases", format!("duplicate atlas name {}", a.name));
            }
        }
        Ok(())
    }
}

/// A generated subject: label plus one time series per configured atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub subject_id: String,
    pub label: Label,
    pub series: Vec<RoiTimeSeries>,
}

/// Network membership of ROI `r` in an atlas with `k` ROIs.
pub fn network_of(r: usize, k: usize) -> usize {
    r * N_NETWORKS / k
}

struct SubjectLatents {
    loadings: [f64; N_NETWORKS],
    global: f64,
    coupling: f64,
    /// `[t][factor]`: networks, global, coupling(0,1), coupling(2,3).
    factors: Vec<[f64; N_NETWORKS + 3]>,
}

fn draw_latents(cfg: &SynthConfig, rng: &mut SeededRng) -> SubjectLatents {
    let mut loadings = [0.0; N_NETWORKS];
    for l in loadings.iter_mut() {
        *l = rng.random_range(0.4..0.9);
    }
    let global = rng.random_range(0.0..0.4);
    let coupling = cfg.delta * rng.random_range(0.5..1.5);
    let factors = (0..cfg.t_len)
        .map(|_| {
            let mut f = [0.0; N_NETWORKS + 3];
            for v in f.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            f
        })
        .collect();
    SubjectLatents {
        loadings,
        global,
        coupling,
        factors,
    }
}

fn draw_series(
    subject_id: &str,
    label: Label,
    atlas: &AtlasSpec,
    lat: &SubjectLatents,
    rng: &mut SeededRng,
) -> Result<RoiTimeSeries> {
    let k = atlas.k;
    let jitter: Vec<f64> = (0..k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (1.0 + 0.2 * z).max(0.2)
        })
        .collect();
    let coupled_factor = |g: usize| -> Option<usize> {
        match (label, g) {
            (Label::Asd, 0 | 1) => Some(N_NETWORKS + 1),
            (Label::Tc, 2 | 3) => Some(N_NETWORKS + 2),
            _ => None,
        }
    };
    let mut values = Vec::with_capacity(lat.factors.len() * k);
    for f in &lat.factors {
        for r in 0..k {
            let g = network_of(r, k);
            let mut signal = lat.loadings[g] * f[g] + lat.global * f[N_NETWORKS];
            if let Some(c) = coupled_factor(g) {
                signal += lat.coupling * f[c];
            }
            let noise: f64 = StandardNormal.sample(rng);
            values.push(jitter[r] * signal + noise);
        }
    }
    RoiTimeSeries::new(subject_id, atlas.clone(), lat.factors.len(), values)
}

pub fn subject_id(i: usize) -> String {
    format!("sub-{i:04}")
}

/// Generates `n_asd` ASD subjects followed by `n_tc` TC subjects. Subject
/// `i` draws from its own RNG stream, so output is independent of thread
/// scheduling.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<SyntheticSubject>> {
    cfg.validate()?;
    let n = cfg.n_asd + cfg.n_tc;
    par::map_indexed(n, |i| {
        let label = if i < cfg.n_asd { Label::Asd } else { Label::Tc };
        let mut rng = seed::stream(cfg.seed, "synth.subject", i as u64);
        let id = subject_id(i);
        let lat = draw_latents(cfg, &mut rng);
        let series = cfg
            .atlases
            .iter()
            .map(|a| draw_series(&id, label, a, &lat, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticSubject {
            subject_id: id,
            label,
            series,
        })
    })
    .into_iter()
    .collect()
}

/// Generates a cohort and computes every subject's connectomes in memory.
pub fn synthetic_cohort(cfg: &SynthConfig) -> Result<Cohort> {
    let subjects = generate_synthetic(cfg)?
        .into_iter()
        .map(|s| {
            let connectomes = s
                .series
                .iter()
                .map(connectome_from_series)
                .collect::<Result<Vec<_>>>()?;
            Subject::new(s.subject_id, s.label, connectomes)
        })
        .collect::<Result<Vec<_>>>()?;
    Cohort::new(cfg.atlases.clone(), subjects)
}
