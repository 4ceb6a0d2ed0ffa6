use rand::Rng;

use super::activation::softmax_in_place;
use super::{Linear, NnError, ParamVisitor, Parameter, Result, Tensor};

/// Multi-head scaled dot-product self-attention over `[B, L, d_model]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub n_heads: usize,
}

pub struct AttentionCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// Attention weights, `[B, h, L, L]` flattened.
    probs: Vec<f64>,
    concat: Tensor,
    batch: usize,
    seq: usize,
}

impl AttentionCache {
    /// Attention weight rows, each of length `L`.
    pub fn weights(&self) -> &[f64] {
        &self.probs
    }

    pub fn seq_len(&self) -> usize {
        self.seq
    }
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(prefix: &str, d_model: usize, n_heads: usize, rng: &mut R) -> Self {
        assert!(n_heads > 0 && d_model.is_multiple_of(n_heads), "n_heads must divide d_model");
        let lin = |s: &str, rng: &mut R| {
            Linear::with_names(
                format!("{prefix}.W{s}"),
                format!("{prefix}.b{s}"),
                d_model,
                d_model,
                rng,
            )
        };
        Self {
            query: lin("q", rng),
            key: lin("k", rng),
            value: lin("v", rng),
            output: lin("o", rng),
            n_heads,
        }
    }

    pub fn d_model(&self) -> usize {
        self.query.n_in()
    }

    fn head_dim(&self) -> usize {
        self.d_model() / self.n_heads
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize)> {
        let d = self.d_model();
        match x.shape() {
            [b, l, w] if *w == d => Ok((*b, *l)),
            other => Err(NnError::ShapeMismatch {
                op: "attention",
                expected: vec![0, 0, d],
                got: other.to_vec(),
            }),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, AttentionCache)> {
        let (batch, seq) = self.dims(x)?;
        let d = self.d_model();
        let (h, hd) = (self.n_heads, self.head_dim());
        let scale = 1.0 / (hd as f64).sqrt();
        let q = self.query.forward(x)?;
        let k = self.key.forward(x)?;
        let v = self.value.forward(x)?;
        let (qd, kd, vd) = (q.data(), k.data(), v.data());

        let mut probs = vec![0.0; batch * h * seq * seq];
        let mut concat = vec![0.0; batch * seq * d];
        for b in 0..batch {
            for head in 0..h {
                let off = head * hd;
                for i in 0..seq {
                    let qi = &qd[(b * seq + i) * d + off..][..hd];
                    let p = &mut probs[((b * h + head) * seq + i) * seq..][..seq];
                    for (j, pj) in p.iter_mut().enumerate() {
                        let kj = &kd[(b * seq + j) * d + off..][..hd];
                        *pj = qi.iter().zip(kj).map(|(a, c)| a * c).sum::<f64>() * scale;
                    }
                    softmax_in_place(p);
                    let out = &mut concat[(b * seq + i) * d + off..][..hd];
                    for (j, &pj) in p.iter().enumerate() {
                        let vj = &vd[(b * seq + j) * d + off..][..hd];
                        for (o, &vv) in out.iter_mut().zip(vj) {
                            *o += pj * vv;
                        }
                    }
                }
            }
        }
        let concat = Tensor::from_vec(&[batch, seq, d], concat)?;
        let y = self.output.forward(&concat)?;
        Ok((
            y,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                probs,
                concat,
                batch,
                seq,
            },
        ))
    }

    pub fn backward(&mut self, cache: &AttentionCache, dy: &Tensor) -> Result<Tensor> {
        let d = self.d_model();
        let (h, hd) = (self.n_heads, self.head_dim());
        let scale = 1.0 / (hd as f64).sqrt();
        let (batch, seq) = (cache.batch, cache.seq);
        let dconcat = self
            .output
            .backward(&cache.concat, dy, true)?
            .expect("dx requested");
        let dc = dconcat.data();
        let (qd, kd, vd) = (cache.q.data(), cache.k.data(), cache.v.data());

        let mut dq = vec![0.0; batch * seq * d];
        let mut dk = vec![0.0; batch * seq * d];
        let mut dv = vec![0.0; batch * seq * d];
        let mut dp = vec![0.0; seq];
        for b in 0..batch {
            for head in 0..h {
                let off = head * hd;
                for i in 0..seq {
                    let p = &cache.probs[((b * h + head) * seq + i) * seq..][..seq];
                    let dout = &dc[(b * seq + i) * d + off..][..hd];
                    for j in 0..seq {
                        let row = (b * seq + j) * d + off;
                        let vj = &vd[row..][..hd];
                        dp[j] = dout.iter().zip(vj).map(|(a, c)| a * c).sum();
                        for (g, &o) in dv[row..][..hd].iter_mut().zip(dout) {
                            *g += p[j] * o;
                        }
                    }
                    let dot: f64 = dp.iter().zip(p).map(|(a, c)| a * c).sum();
                    let qrow = (b * seq + i) * d + off;
                    for j in 0..seq {
                        let ds = p[j] * (dp[j] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let krow = (b * seq + j) * d + off;
                        for c in 0..hd {
                            dq[qrow + c] += ds * kd[krow + c];
                            dk[krow + c] += ds * qd[qrow + c];
                        }
                    }
                }
            }
        }
        let shape = cache.x.shape();
        let dq = Tensor::from_vec(shape, dq)?;
        let dk = Tensor::from_vec(shape, dk)?;
        let dv = Tensor::from_vec(shape, dv)?;
        let mut dx = self.query.backward(&cache.x, &dq, true)?.expect("dx");
        dx.add_assign(&self.key.backward(&cache.x, &dk, true)?.expect("dx"))?;
        dx.add_assign(&self.value.backward(&cache.x, &dv, true)?.expect("dx"))?;
        Ok(dx)
    }
}

impl ParamVisitor for MultiHeadAttention {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.query.visit(f);
        self.key.visit(f);
        self.value.visit(f);
        self.output.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.query.visit_mut(f);
        self.key.visit_mut(f);
        self.value.visit_mut(f);
        self.output.visit_mut(f);
    }
}
