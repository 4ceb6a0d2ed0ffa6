use super::{Result, TrainError};
use crate::nn::ParamVisitor;

/// AdamW with decoupled weight decay. Decay applies only to parameters
/// flagged `decay` (weight matrices); biases and layer-norm gains/biases are
/// never decayed.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for AdamW {
    fn default() -> Self {
        Self::new()
    }
}

impl AdamW {
    pub fn new() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update:
    /// `θ ← θ − lr·(m̂/(√v̂ + eps) + wd·θ)`, with `wd` only on decayed
    /// parameters.
    pub fn step<M: ParamVisitor + ?Sized>(&mut self, model: &mut M, lr: f64, wd: f64) -> Result<()> {
        let mut missing = None;
        model.visit(&mut |p| {
            if !p.has_grad && missing.is_none() {
                missing = Some(p.name.clone());
            }
        });
        if let Some(name) = missing {
            return Err(TrainError::NoGradient(name));
        }
        if self.m.is_empty() {
            model.visit(&mut |p| {
                self.m.push(vec![0.0; p.len()]);
                self.v.push(vec![0.0; p.len()]);
            });
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let mut idx = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        model.visit_mut(&mut |p| {
            let (m, v) = (&mut ms[idx], &mut vs[idx]);
            idx += 1;
            let decay = if p.decay { wd } else { 0.0 };
            let grad = p.grad.data().to_vec();
            for (((theta, g), mj), vj) in p.value.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mj = b1 * *mj + (1.0 - b1) * g;
                *vj = b2 * *vj + (1.0 - b2) * g * g;
                let m_hat = *mj / c1;
                let v_hat = *vj / c2;
                *theta -= lr * (m_hat / (v_hat.sqrt() + eps) + decay * *theta);
            }
        });
        Ok(())
    }
}
