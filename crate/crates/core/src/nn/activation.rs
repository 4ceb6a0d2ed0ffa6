use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::Tensor;

/// Exact GELU, `0.5·x·(1 + erf(x/√2))`.
pub fn gelu(x: &Tensor) -> Tensor {
    x.map(|v| 0.5 * v * (1.0 + libm::erf(v * FRAC_1_SQRT_2)))
}

/// `dx = dy · (Φ(x) + x·φ(x))`.
pub fn gelu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        let cdf = 0.5 * (1.0 + libm::erf(v * FRAC_1_SQRT_2));
        let pdf = inv_sqrt_2pi * (-0.5 * v * v).exp();
        *d *= cdf + v * pdf;
    }
    dx
}

/// Softmax over the last axis with max subtraction.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let w = x.width();
    for row in out.data_mut().chunks_mut(w) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Backward of [`softmax_rows`] given its output `y`:
/// `dx = y ⊙ (dy − Σ dy⊙y)` per row.
pub fn softmax_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let w = y.width();
    let mut dx = dy.clone();
    for (drow, yrow) in dx.data_mut().chunks_mut(w).zip(y.data().chunks(w)) {
        let dot: f64 = drow.iter().zip(yrow).map(|(d, y)| d * y).sum();
        for (d, &yv) in drow.iter_mut().zip(yrow) {
            *d = yv * (*d - dot);
        }
    }
    dx
}
