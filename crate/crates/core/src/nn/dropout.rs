use rand::Rng;

use super::{Mode, Tensor};

/// Per-element survivor scale (`0` or `1/(1-rate)`); `None` when dropout was
/// the identity.
pub type DropoutMask = Option<Vec<f64>>;

/// Inverted dropout. Evaluation mode and `rate == 0` return the input
/// unchanged.
pub fn dropout(x: &Tensor, rate: f64, mode: &mut Mode<'_>) -> (Tensor, DropoutMask) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    let rng = match mode {
        Mode::Train(rng) if rate > 0.0 => rng,
        _ => return (x.clone(), None),
    };
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    (y, Some(mask))
}

pub fn dropout_backward(mask: &DropoutMask, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    if let Some(mask) = mask {
        for (v, m) in dx.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
    }
    dx
}
