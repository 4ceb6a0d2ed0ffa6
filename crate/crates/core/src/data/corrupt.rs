//! Training-time corruptions: Gaussian augmentation noise and imputation
//! masks.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Connectome, DataError, Result};

/// Binary mask, `0` marks a hidden (masked) position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseMask {
    pub atlas_index: usize,
    pub mask: Vec<u8>,
}

impl NoiseMask {
    pub fn all_ones(atlas_index: usize, n: usize) -> Self {
        Self {
            atlas_index,
            mask: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn is_masked(&self, j: usize) -> bool {
        self.mask[j] == 0
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 0).count()
    }
}

/// Number of masked positions for a feature vector of length `n`.
pub fn mask_count(n: usize, mask_ratio: f64) -> usize {
    ((mask_ratio * n as f64).round() as usize).min(n)
}

/// Masks exactly `round(mask_ratio · n)` positions drawn without
/// replacement.
pub fn sample_mask<R: Rng + ?Sized>(atlas_index: usize, n: usize, mask_ratio: f64, rng: &mut R) -> NoiseMask {
    assert!(mask_ratio > 0.0 && mask_ratio < 1.0, "mask ratio must be in (0, 1)");
    let mut mask = vec![1u8; n];
    for j in sample(rng, n, mask_count(n, mask_ratio)) {
        mask[j] = 0;
    }
    NoiseMask { atlas_index, mask }
}

/// `x ⊙ M` in place.
pub fn mask_in_place(x: &mut [f64], m: &NoiseMask) -> Result<()> {
    if x.len() != m.len() {
        return Err(DataError::LengthMismatch {
            expected: m.len(),
            got: x.len(),
        });
    }
    for (v, &b) in x.iter_mut().zip(&m.mask) {
        if b == 0 {
            *v = 0.0;
        }
    }
    Ok(())
}

pub fn apply_mask(c: &Connectome, m: &NoiseMask) -> Result<Connectome> {
    let mut out = c.clone();
    mask_in_place(&mut out.features, m)?;
    Ok(out)
}

/// With probability `p_aug` adds `N(0, sigma²)` noise to every entry.
/// Returns whether noise was added.
pub fn augment_in_place<R: Rng + ?Sized>(x: &mut [f64], p_aug: f64, sigma: f64, rng: &mut R) -> bool {
    if rng.random::<f64>() >= p_aug {
        return false;
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for v in x.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    true
}

pub fn augment_noise<R: Rng + ?Sized>(c: &Connectome, p_aug: f64, sigma: f64, rng: &mut R) -> Connectome {
    let mut out = c.clone();
    augment_in_place(&mut out.features, p_aug, sigma, rng);
    out
}
