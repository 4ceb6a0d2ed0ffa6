use rand::Rng;

use super::{HeadMode, ModelError, Result, SatCache, SatConfig, SingleAtlasTransformer};
use crate::nn::{softmax_rows, Mode, ParamVisitor, Parameter, Tensor};

/// One or more single-atlas transformers whose class logits are averaged
/// before a single softmax. With three distinct atlases this is the
/// METAFormer ensemble; with one it is a plain SAT.
#[derive(Debug, Clone, PartialEq)]
pub struct AtlasEnsemble {
    pub sats: Vec<SingleAtlasTransformer>,
}

impl AtlasEnsemble {
    /// Three SATs over pairwise distinct atlases sharing every
    /// hyperparameter except the atlas.
    pub fn metaformer<R: Rng + ?Sized>(configs: &[SatConfig], mode: HeadMode, rng: &mut R) -> Result<Self> {
        if configs.len() != 3 {
            return Err(ModelError::InvalidConfig(format!(
                "METAFormer needs exactly 3 atlases, got {}",
                configs.len()
            )));
        }
        Self::from_configs(configs, mode, rng)
    }

    pub fn single<R: Rng + ?Sized>(config: SatConfig, mode: HeadMode, rng: &mut R) -> Result<Self> {
        Self::from_configs(&[config], mode, rng)
    }

    fn from_configs<R: Rng + ?Sized>(configs: &[SatConfig], mode: HeadMode, rng: &mut R) -> Result<Self> {
        for (i, c) in configs.iter().enumerate() {
            let first = &configs[0];
            if configs[..i].iter().any(|o| o.atlas == c.atlas) {
                return Err(ModelError::InvalidConfig(format!("atlas {} repeated", c.atlas.name)));
            }
            if (c.d_model, c.n_layers, c.d_ff, c.n_heads) != (first.d_model, first.n_layers, first.d_ff, first.n_heads)
                || c.dropout_rate != first.dropout_rate
            {
                return Err(ModelError::InvalidConfig("SATs must share hyperparameters".into()));
            }
        }
        let sats = configs
            .iter()
            .enumerate()
            .map(|(i, c)| SingleAtlasTransformer::new(c.clone(), &format!("sat{i}"), mode, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sats })
    }

    pub fn len(&self) -> usize {
        self.sats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sats.is_empty()
    }

    pub fn mode(&self) -> HeadMode {
        self.sats[0].mode()
    }

    pub fn input_lens(&self) -> Vec<usize> {
        self.sats.iter().map(|s| s.input_len()).collect()
    }

    pub fn set_dropout(&mut self, rate: f64) {
        for s in &mut self.sats {
            s.config.dropout_rate = rate;
        }
    }

    fn check_views(&self, views: &[Tensor]) -> Result<()> {
        if views.len() != self.sats.len() {
            return Err(ModelError::ViewCount {
                expected: self.sats.len(),
                got: views.len(),
            });
        }
        for (position, (v, s)) in views.iter().zip(&self.sats).enumerate() {
            if v.width() != s.input_len() {
                return Err(ModelError::AtlasOrderMismatch {
                    position,
                    expected: s.input_len(),
                    got: v.width(),
                });
            }
        }
        Ok(())
    }

    /// Mean of the SATs' logits, `[B, 2]`.
    pub fn forward_logits(&self, views: &[Tensor], mode: &mut Mode<'_>) -> Result<(Tensor, Vec<SatCache>)> {
        self.check_views(views)?;
        let mut caches = Vec::with_capacity(self.sats.len());
        let mut sum: Option<Tensor> = None;
        for (sat, x) in self.sats.iter().zip(views) {
            let (logits, cache) = sat.forward_classify(x, &mut mode.reborrow())?;
            caches.push(cache);
            match &mut sum {
                Some(s) => s.add_assign(&logits)?,
                None => sum = Some(logits),
            }
        }
        let mut mean = sum.expect("at least one SAT");
        mean.scale(1.0 / self.sats.len() as f64);
        Ok((mean, caches))
    }

    /// Class probabilities `softmax(mean logits)`, `[B, 2]`.
    pub fn forward_probs(&self, views: &[Tensor]) -> Result<Tensor> {
        let (logits, _) = self.forward_logits(views, &mut Mode::Eval)?;
        Ok(softmax_rows(&logits))
    }

    /// Single-sample probabilities in evaluation mode.
    pub fn predict_one(&self, xs: &[&[f64]]) -> Result<[f64; 2]> {
        let views = xs
            .iter()
            .map(|x| Tensor::from_vec(&[1, x.len()], x.to_vec()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let p = self.forward_probs(&views)?;
        Ok([p.data()[0], p.data()[1]])
    }

    /// Backward through the logit average.
    pub fn backward_logits(&mut self, caches: &[SatCache], dmean: &Tensor) -> Result<()> {
        let mut share = dmean.clone();
        share.scale(1.0 / self.sats.len() as f64);
        for (sat, cache) in self.sats.iter_mut().zip(caches) {
            sat.backward(cache, &share)?;
        }
        Ok(())
    }

    /// Per-atlas reconstructions.
    pub fn forward_impute(&self, views: &[Tensor], mode: &mut Mode<'_>) -> Result<(Vec<Tensor>, Vec<SatCache>)> {
        self.check_views(views)?;
        let mut outs = Vec::with_capacity(self.sats.len());
        let mut caches = Vec::with_capacity(self.sats.len());
        for (sat, x) in self.sats.iter().zip(views) {
            let (y, c) = sat.forward_impute(x, &mut mode.reborrow())?;
            outs.push(y);
            caches.push(c);
        }
        Ok((outs, caches))
    }

    pub fn backward_impute(&mut self, caches: &[SatCache], douts: &[Tensor]) -> Result<()> {
        for ((sat, cache), d) in self.sats.iter_mut().zip(caches).zip(douts) {
            sat.backward(cache, d)?;
        }
        Ok(())
    }

    /// Converts a pretrained (imputation-mode) model into a classifier:
    /// embeddings and encoders are kept bit-exact, imputation heads are
    /// dropped and fresh He-initialized classification heads with zero
    /// biases are attached.
    pub fn transfer_pretrained<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        for sat in &mut self.sats {
            sat.swap_head(HeadMode::Classify, rng);
            sat.zero_grad();
        }
        self
    }
}

impl ParamVisitor for AtlasEnsemble {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        for s in &self.sats {
            s.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        for s in &mut self.sats {
            s.visit_mut(f);
        }
    }
}
