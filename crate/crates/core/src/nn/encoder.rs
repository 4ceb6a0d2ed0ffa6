use rand::Rng;

use super::attention::AttentionCache;
use super::dropout::{dropout, dropout_backward, DropoutMask};
use super::norm::{LayerNormCache, DEFAULT_EPS};
use super::{gelu, gelu_backward, LayerNorm, Linear, Mode, MultiHeadAttention};
use super::{ParamVisitor, Parameter, Result, Tensor};

/// Post-norm transformer encoder layer:
/// `x1 = LN(x + Drop(MHA(x)))`, `y = LN(x1 + Drop(W2·GELU(W1·x1)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub attn: MultiHeadAttention,
    pub ln1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: LayerNorm,
}

pub struct EncoderCache {
    attn: AttentionCache,
    drop1: DropoutMask,
    ln1: LayerNormCache,
    x1: Tensor,
    hidden: Tensor,
    activated: Tensor,
    drop2: DropoutMask,
    ln2: LayerNormCache,
}

impl EncoderLayer {
    pub fn new<R: Rng + ?Sized>(
        prefix: &str,
        d_model: usize,
        d_ff: usize,
        n_heads: usize,
        rng: &mut R,
    ) -> Self {
        let ffn = format!("{prefix}.ffn");
        Self {
            attn: MultiHeadAttention::new(&format!("{prefix}.attn"), d_model, n_heads, rng),
            ln1: LayerNorm::new(&format!("{prefix}.ln1"), d_model, DEFAULT_EPS),
            ff1: Linear::with_names(format!("{ffn}.W1"), format!("{ffn}.b1"), d_model, d_ff, rng),
            ff2: Linear::with_names(format!("{ffn}.W2"), format!("{ffn}.b2"), d_ff, d_model, rng),
            ln2: LayerNorm::new(&format!("{prefix}.ln2"), d_model, DEFAULT_EPS),
        }
    }

    pub fn forward(&self, x: &Tensor, rate: f64, mode: &mut Mode<'_>) -> Result<(Tensor, EncoderCache)> {
        let (a, attn) = self.attn.forward(x)?;
        let (a, drop1) = dropout(&a, rate, mode);
        let (x1, ln1) = self.ln1.forward(&x.add(&a)?)?;
        let hidden = self.ff1.forward(&x1)?;
        let activated = gelu(&hidden);
        let f = self.ff2.forward(&activated)?;
        let (f, drop2) = dropout(&f, rate, mode);
        let (y, ln2) = self.ln2.forward(&x1.add(&f)?)?;
        Ok((
            y,
            EncoderCache {
                attn,
                drop1,
                ln1,
                x1,
                hidden,
                activated,
                drop2,
                ln2,
            },
        ))
    }

    pub fn backward(&mut self, cache: &EncoderCache, dy: &Tensor) -> Result<Tensor> {
        // y = LN2(x1 + f)
        let ds2 = self.ln2.backward(&cache.ln2, dy)?;
        let df = dropout_backward(&cache.drop2, &ds2);
        let dact = self.ff2.backward(&cache.activated, &df, true)?.expect("dx");
        let dhidden = gelu_backward(&cache.hidden, &dact);
        let mut dx1 = self.ff1.backward(&cache.x1, &dhidden, true)?.expect("dx");
        dx1.add_assign(&ds2)?;
        // x1 = LN1(x + a)
        let ds1 = self.ln1.backward(&cache.ln1, &dx1)?;
        let da = dropout_backward(&cache.drop1, &ds1);
        let mut dx = self.attn.backward(&cache.attn, &da)?;
        dx.add_assign(&ds1)?;
        Ok(dx)
    }
}

impl ParamVisitor for EncoderLayer {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.attn.visit(f);
        self.ln1.visit(f);
        self.ff1.visit(f);
        self.ff2.visit(f);
        self.ln2.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.attn.visit_mut(f);
        self.ln1.visit_mut(f);
        self.ff1.visit_mut(f);
        self.ff2.visit_mut(f);
        self.ln2.visit_mut(f);
    }
}
