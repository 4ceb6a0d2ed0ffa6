use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;

/// He (Kaiming) normal initialization: i.i.d. `N(0, 2 / fan_in)`.
///
/// Biases are not drawn here; callers create them as exact zeros.
pub fn he_init<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    assert!(fan_in >= 1, "fan_in must be positive");
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(rng)).collect();
    Tensor::from_vec(shape, data).expect("shape/product agree")
}
