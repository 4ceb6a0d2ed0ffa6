use super::{Result, TrainError};
use crate::data::NoiseMask;
use crate::nn::Tensor;

/// Mean cross entropy of `softmax(logits)` against class indices, with its
/// gradient `(softmax − onehot) / B` w.r.t. the logits.
pub fn cross_entropy_loss(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let c = logits.width();
    let b = logits.rows();
    if labels.len() != b || b == 0 {
        return Err(TrainError::LengthMismatch {
            expected: b,
            got: labels.len(),
        });
    }
    let mut grad = logits.clone();
    let mut total = 0.0;
    for (row, &y) in grad.data_mut().chunks_mut(c).zip(labels) {
        if y >= c {
            return Err(TrainError::BadLabel(y));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
        row[y] -= 1.0;
    }
    grad.scale(1.0 / b as f64);
    Ok((total / b as f64, grad))
}

/// Multi-atlas masked mean squared error for one subject:
/// `(1/m) Σ_i (1/n_i) Σ_{j masked} (x_ij − x̂_ij)²`, normalized by the full
/// feature length `n_i`. Returns the loss and the gradient w.r.t. each
/// prediction, which is zero at every unmasked position.
pub fn mamse_loss(preds: &[&[f64]], originals: &[&[f64]], masks: &[&NoiseMask]) -> Result<(f64, Vec<Vec<f64>>)> {
    let m = preds.len();
    if originals.len() != m || masks.len() != m {
        return Err(TrainError::LengthMismatch {
            expected: m,
            got: originals.len().min(masks.len()),
        });
    }
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(m);
    for ((pred, orig), mask) in preds.iter().zip(originals).zip(masks) {
        let n = pred.len();
        if orig.len() != n || mask.len() != n {
            return Err(TrainError::LengthMismatch {
                expected: n,
                got: if orig.len() != n { orig.len() } else { mask.len() },
            });
        }
        let mut g = vec![0.0; n];
        let mut sq = 0.0;
        for j in 0..n {
            if mask.is_masked(j) {
                let e = pred[j] - orig[j];
                sq += e * e;
                g[j] = 2.0 * e / (n as f64 * m as f64);
            }
        }
        loss += sq / n as f64;
        grads.push(g);
    }
    Ok((loss / m as f64, grads))
}

/// Batch mean of [`mamse_loss`]. `preds[i]` and `originals[i]` are
/// `[B, n_i]`; `masks[b][i]` is subject `b`'s mask for atlas `i`.
pub fn mamse_batch(preds: &[Tensor], originals: &[Tensor], masks: &[Vec<NoiseMask>]) -> Result<(f64, Vec<Tensor>)> {
    let b = masks.len();
    if b == 0 {
        return Err(TrainError::EmptySplit("batch"));
    }
    let mut grads: Vec<Tensor> = preds.iter().map(|p| Tensor::zeros(p.shape())).collect();
    let mut total = 0.0;
    for (s, subject_masks) in masks.iter().enumerate() {
        let p: Vec<&[f64]> = preds.iter().map(|t| t.row(s)).collect();
        let o: Vec<&[f64]> = originals.iter().map(|t| t.row(s)).collect();
        let mk: Vec<&NoiseMask> = subject_masks.iter().collect();
        let (l, g) = mamse_loss(&p, &o, &mk)?;
        total += l;
        for (dst, src) in grads.iter_mut().zip(g) {
            let w = dst.width();
            for (d, v) in dst.data_mut()[s * w..(s + 1) * w].iter_mut().zip(src) {
                *d = v / b as f64;
            }
        }
    }
    Ok((total / b as f64, grads))
}
