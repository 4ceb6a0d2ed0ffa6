use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Result, SatConfig};
use crate::nn::dropout::{dropout, dropout_backward, DropoutMask};
use crate::nn::{EncoderCache, EncoderLayer, Linear, Mode, ParamVisitor, Parameter, Tensor};

/// Which output head is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadMode {
    Classify,
    Impute,
}

#[derive(Debug, Clone, PartialEq)]
enum Head {
    Classify(Linear),
    Impute(Linear),
}

/// Embedding, encoder stack, final dropout and one output head.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleAtlasTransformer {
    pub config: SatConfig,
    prefix: String,
    pub embed: Linear,
    pub encoders: Vec<EncoderLayer>,
    head: Head,
}

pub struct SatCache {
    input: Tensor,
    encoders: Vec<EncoderCache>,
    trunk_out: Tensor,
    drop: DropoutMask,
    head_in: Tensor,
}

impl SingleAtlasTransformer {
    /// He-initialized weights, zero biases. `prefix` namespaces parameter
    /// names, e.g. `sat0`.
    pub fn new<R: Rng + ?Sized>(config: SatConfig, prefix: &str, mode: HeadMode, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (n, d) = (config.input_len(), config.d_model);
        let embed = Linear::new(&format!("{prefix}.embed"), n, d, rng);
        let encoders = (0..config.n_layers)
            .map(|l| EncoderLayer::new(&format!("{prefix}.enc{l}"), d, config.d_ff, config.n_heads, rng))
            .collect();
        let head = Self::fresh_head(prefix, mode, n, d, rng);
        Ok(Self {
            config,
            prefix: prefix.to_string(),
            embed,
            encoders,
            head,
        })
    }

    fn fresh_head<R: Rng + ?Sized>(prefix: &str, mode: HeadMode, n: usize, d: usize, rng: &mut R) -> Head {
        match mode {
            HeadMode::Classify => Head::Classify(Linear::new(&format!("{prefix}.head"), d, 2, rng)),
            HeadMode::Impute => Head::Impute(Linear::new(&format!("{prefix}.impute"), d, n, rng)),
        }
    }

    pub fn mode(&self) -> HeadMode {
        match self.head {
            Head::Classify(_) => HeadMode::Classify,
            Head::Impute(_) => HeadMode::Impute,
        }
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn input_len(&self) -> usize {
        self.config.input_len()
    }

    /// `√d_model`.
    pub fn embed_scale(&self) -> f64 {
        (self.config.d_model as f64).sqrt()
    }

    pub fn head(&self) -> &Linear {
        match &self.head {
            Head::Classify(l) | Head::Impute(l) => l,
        }
    }

    pub fn head_mut(&mut self) -> &mut Linear {
        match &mut self.head {
            Head::Classify(l) | Head::Impute(l) => l,
        }
    }

    /// Replaces the head with a freshly initialized one of the given mode;
    /// embedding and encoder weights are untouched.
    pub fn swap_head<R: Rng + ?Sized>(&mut self, mode: HeadMode, rng: &mut R) {
        let (n, d) = (self.input_len(), self.config.d_model);
        self.head = Self::fresh_head(&self.prefix, mode, n, d, rng);
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let n = self.input_len();
        if x.width() != n || x.shape().len() != 2 {
            return Err(ModelError::LengthMismatch {
                expected: n,
                got: x.width(),
            });
        }
        Ok(())
    }

    /// `√d_model · (xW_e + b_e)` as a `[B, 1, d_model]` token batch.
    pub fn embed_forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut e = self.embed.forward(x)?;
        e.scale(self.embed_scale());
        let b = x.shape()[0];
        Ok(e.reshape(&[b, 1, self.config.d_model])?)
    }

    /// Runs the trunk and whichever head is attached.
    pub fn forward(&self, x: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, SatCache)> {
        let mut h = self.embed_forward(x)?;
        let rate = self.config.dropout_rate;
        let mut encoders = Vec::with_capacity(self.encoders.len());
        for layer in &self.encoders {
            let (next, cache) = layer.forward(&h, rate, mode)?;
            encoders.push(cache);
            h = next;
        }
        let (head_in, drop) = dropout(&h, rate, mode);
        let b = x.shape()[0];
        let head_in = head_in.reshape(&[b, self.config.d_model])?;
        let out = self.head().forward(&head_in)?;
        out.check_finite("sat.forward")?;
        Ok((
            out,
            SatCache {
                input: x.clone(),
                encoders,
                trunk_out: h,
                drop,
                head_in,
            },
        ))
    }

    fn forward_expecting(&self, x: &Tensor, want: HeadMode, mode: &mut Mode<'_>) -> Result<(Tensor, SatCache)> {
        if self.mode() != want {
            return Err(ModelError::HeadAbsent {
                expected: want,
                actual: self.mode(),
            });
        }
        self.forward(x, mode)
    }

    /// Raw two-class logits, `[B, 2]`.
    pub fn forward_classify(&self, x: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, SatCache)> {
        self.forward_expecting(x, HeadMode::Classify, mode)
    }

    /// Reconstruction of the full feature vector, `[B, n_i]`.
    pub fn forward_impute(&self, x: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, SatCache)> {
        self.forward_expecting(x, HeadMode::Impute, mode)
    }

    /// Single-sample logits in evaluation mode.
    pub fn classify_one(&self, x: &[f64]) -> Result<[f64; 2]> {
        let t = Tensor::from_vec(&[1, x.len()], x.to_vec())?;
        let (out, _) = self.forward_classify(&t, &mut Mode::Eval)?;
        Ok([out.data()[0], out.data()[1]])
    }

    /// Accumulates parameter gradients for upstream gradient `dout`.
    pub fn backward(&mut self, cache: &SatCache, dout: &Tensor) -> Result<()> {
        let dhead_in = self.head_mut().backward(&cache.head_in, dout, true)?.expect("dx");
        let dhead_in = dhead_in.reshape(cache.trunk_out.shape())?;
        let mut dh = dropout_backward(&cache.drop, &dhead_in);
        for (layer, c) in self.encoders.iter_mut().zip(&cache.encoders).rev() {
            dh = layer.backward(c, &dh)?;
        }
        self.embed_backward(&cache.input, &dh, false)?;
        Ok(())
    }

    /// Backward of [`Self::embed_forward`] for token gradients `[B, 1, d]`.
    /// Accumulates embedding gradients and optionally returns `dx`.
    pub fn embed_backward(&mut self, x: &Tensor, dtokens: &Tensor, need_dx: bool) -> Result<Option<Tensor>> {
        let b = x.shape()[0];
        let mut de = dtokens.clone().reshape(&[b, self.config.d_model])?;
        de.scale(self.embed_scale());
        Ok(self.embed.backward(x, &de, need_dx)?)
    }
}

impl ParamVisitor for SingleAtlasTransformer {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.embed.visit(f);
        for e in &self.encoders {
            e.visit(f);
        }
        self.head().visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.embed.visit_mut(f);
        for e in &mut self.encoders {
            e.visit_mut(f);
        }
        self.head_mut().visit_mut(f);
    }
}
