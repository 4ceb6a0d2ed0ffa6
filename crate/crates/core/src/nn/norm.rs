use super::{NnError, ParamVisitor, Parameter, Result, Tensor};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Layer normalization over the last axis with learned gain and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Parameter,
    pub bias: Parameter,
    pub eps: f64,
}

pub struct LayerNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(prefix: &str, d: usize, eps: f64) -> Self {
        Self {
            gain: Parameter::new(format!("{prefix}.gain"), Tensor::filled(&[d], 1.0), false),
            bias: Parameter::zeros(format!("{prefix}.bias"), &[d], false),
            eps,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerNormCache)> {
        let d = self.gain.len();
        if x.width() != d {
            return Err(NnError::ShapeMismatch {
                op: "layer_norm",
                expected: vec![d],
                got: x.shape().to_vec(),
            });
        }
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for row in xhat.data_mut().chunks_mut(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + self.eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let mut y = xhat.clone();
        let (g, b) = (self.gain.value.data(), self.bias.value.data());
        for row in y.data_mut().chunks_mut(d) {
            for ((v, gv), bv) in row.iter_mut().zip(g).zip(b) {
                *v = *v * gv + bv;
            }
        }
        Ok((y, LayerNormCache { xhat, inv_std }))
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &Tensor) -> Result<Tensor> {
        let d = self.gain.len();
        cache.xhat.expect_same_shape(dy, "layer_norm.backward")?;
        let mut dgain = vec![0.0; d];
        let mut dbias = vec![0.0; d];
        let mut dx = dy.clone();
        let g = self.gain.value.data();
        for ((drow, xrow), &inv) in dx
            .data_mut()
            .chunks_mut(d)
            .zip(cache.xhat.data().chunks(d))
            .zip(&cache.inv_std)
        {
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for j in 0..d {
                dgain[j] += drow[j] * xrow[j];
                dbias[j] += drow[j];
                let dxhat = drow[j] * g[j];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xrow[j];
            }
            let n = d as f64;
            for j in 0..d {
                let dxhat = drow[j] * g[j];
                drow[j] = inv * (dxhat - sum_dxhat / n - xrow[j] * sum_dxhat_xhat / n);
            }
        }
        self.gain.accumulate(&dgain);
        self.bias.accumulate(&dbias);
        Ok(dx)
    }
}

impl ParamVisitor for LayerNorm {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        f(&self.gain);
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.gain);
        f(&mut self.bias);
    }
}
