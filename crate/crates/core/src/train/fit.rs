use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::loss::{cross_entropy_loss, mamse_batch};
use super::{AdamW, Phase, Result, TrainConfig, TrainError};
use crate::data::corrupt::{augment_in_place, mask_in_place, sample_mask};
use crate::data::NoiseMask;
use crate::model::{AtlasEnsemble, HeadMode, ModelError};
use crate::nn::{Mode, ParamVisitor, Tensor};
use crate::seed::{self, SeededRng};

/// One standardized subject: a feature vector per model atlas plus its
/// class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub views: Vec<Vec<f64>>,
    pub label: usize,
}

/// A training objective over an indexed dataset.
pub trait Objective: Sync {
    fn head_mode(&self) -> HeadMode;

    /// Forward and backward on one batch, leaving gradients in the model.
    fn train_batch(&self, model: &mut AtlasEnsemble, batch: &[usize], rng: &mut SeededRng) -> Result<f64>;

    /// Mean loss over `indices` in evaluation mode.
    fn eval_loss(&self, model: &AtlasEnsemble, indices: &[usize]) -> Result<f64>;
}

fn stack_view<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Result<Tensor> {
    let rows: Vec<&[f64]> = rows.collect();
    Ok(Tensor::from_rows(&rows)?)
}

const EVAL_CHUNK: usize = 256;

/// Supervised two-class cross entropy with per-sample Gaussian augmentation.
pub struct ClassifyObjective<'a> {
    pub examples: &'a [Example],
    pub p_aug: f64,
    pub noise_sigma: f64,
}

impl<'a> ClassifyObjective<'a> {
    pub fn new(examples: &'a [Example], cfg: &TrainConfig) -> Self {
        Self {
            examples,
            p_aug: cfg.p_aug,
            noise_sigma: cfg.noise_sigma,
        }
    }

    fn views(&self, model: &AtlasEnsemble, batch: &[usize]) -> Result<Vec<Tensor>> {
        (0..model.len())
            .map(|i| stack_view(batch.iter().map(|&s| self.examples[s].views[i].as_slice())))
            .collect()
    }
}

impl Objective for ClassifyObjective<'_> {
    fn head_mode(&self) -> HeadMode {
        HeadMode::Classify
    }

    fn train_batch(&self, model: &mut AtlasEnsemble, batch: &[usize], rng: &mut SeededRng) -> Result<f64> {
        let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(batch.len());
        for &s in batch {
            let mut views = self.examples[s].views.clone();
            for v in views.iter_mut().take(model.len()) {
                augment_in_place(v, self.p_aug, self.noise_sigma, rng);
            }
            rows.push(views);
        }
        let views = (0..model.len())
            .map(|i| stack_view(rows.iter().map(|r| r[i].as_slice())))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<usize> = batch.iter().map(|&s| self.examples[s].label).collect();
        let (logits, caches) = model.forward_logits(&views, &mut Mode::Train(rng))?;
        let (loss, grad) = cross_entropy_loss(&logits, &labels)?;
        model.backward_logits(&caches, &grad)?;
        Ok(loss)
    }

    fn eval_loss(&self, model: &AtlasEnsemble, indices: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for chunk in indices.chunks(EVAL_CHUNK) {
            let views = self.views(model, chunk)?;
            let labels: Vec<usize> = chunk.iter().map(|&s| self.examples[s].label).collect();
            let (logits, _) = model.forward_logits(&views, &mut Mode::Eval)?;
            let (loss, _) = cross_entropy_loss(&logits, &labels)?;
            total += loss * chunk.len() as f64;
        }
        Ok(total / indices.len() as f64)
    }
}

/// Masked-imputation objective. It only ever sees feature vectors, never
/// labels. Evaluation uses one fixed mask per (subject, atlas) drawn from
/// the objective's seed, so validation losses are comparable across epochs.
pub struct ImputeObjective<'a> {
    pub views: Vec<&'a [Vec<f64>]>,
    pub mask_ratio: f64,
    eval_masks: BTreeMap<usize, Vec<NoiseMask>>,
}

impl<'a> ImputeObjective<'a> {
    pub fn new(views: Vec<&'a [Vec<f64>]>, mask_ratio: f64, eval_indices: &[usize], mask_seed: u64) -> Self {
        let mut rng = seed::stream(mask_seed, "eval-mask", 0);
        let eval_masks = eval_indices
            .iter()
            .map(|&s| {
                let masks = views[s]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| sample_mask(i, v.len(), mask_ratio, &mut rng))
                    .collect();
                (s, masks)
            })
            .collect();
        Self {
            views,
            mask_ratio,
            eval_masks,
        }
    }

    fn run(
        &self,
        model: &AtlasEnsemble,
        batch: &[usize],
        masks: &[Vec<NoiseMask>],
        mode: &mut Mode<'_>,
    ) -> Result<(f64, Vec<Tensor>, Vec<crate::model::SatCache>)> {
        let m = model.len();
        let originals = (0..m)
            .map(|i| stack_view(batch.iter().map(|&s| self.views[s][i].as_slice())))
            .collect::<Result<Vec<_>>>()?;
        let mut masked = originals.clone();
        for (i, t) in masked.iter_mut().enumerate() {
            let w = t.width();
            for (row, subject_masks) in t.data_mut().chunks_mut(w).zip(masks) {
                mask_in_place(row, &subject_masks[i]).map_err(|_| TrainError::LengthMismatch {
                    expected: w,
                    got: subject_masks[i].len(),
                })?;
            }
        }
        let (preds, caches) = model.forward_impute(&masked, mode)?;
        let (loss, grads) = mamse_batch(&preds, &originals, masks)?;
        Ok((loss, grads, caches))
    }

    pub fn eval_mask(&self, subject: usize) -> Option<&[NoiseMask]> {
        self.eval_masks.get(&subject).map(|v| v.as_slice())
    }
}

impl Objective for ImputeObjective<'_> {
    fn head_mode(&self) -> HeadMode {
        HeadMode::Impute
    }

    fn train_batch(&self, model: &mut AtlasEnsemble, batch: &[usize], rng: &mut SeededRng) -> Result<f64> {
        let masks: Vec<Vec<NoiseMask>> = batch
            .iter()
            .map(|&s| {
                (0..model.len())
                    .map(|i| sample_mask(i, self.views[s][i].len(), self.mask_ratio, rng))
                    .collect()
            })
            .collect();
        let (loss, grads, caches) = self.run(model, batch, &masks, &mut Mode::Train(rng))?;
        model.backward_impute(&caches, &grads)?;
        Ok(loss)
    }

    fn eval_loss(&self, model: &AtlasEnsemble, indices: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for chunk in indices.chunks(EVAL_CHUNK) {
            let masks = chunk
                .iter()
                .map(|s| {
                    self.eval_masks
                        .get(s)
                        .cloned()
                        .ok_or(TrainError::EmptySplit("evaluation masks"))
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, _, _) = self.run(model, chunk, &masks, &mut Mode::Eval)?;
            total += loss * chunk.len() as f64;
        }
        Ok(total / indices.len() as f64)
    }
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub stopped_early: bool,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters restored to the best validation epoch.
    pub model: AtlasEnsemble,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl FitResult {
    /// `epoch,train_loss,val_loss,stopped_early,best_epoch`
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,stopped_early,best_epoch\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.val_loss, r.stopped_early, r.best_epoch
            ));
        }
        out
    }
}

/// One pass over the shuffled training indices, one optimizer step per
/// batch (the last batch may be smaller). Returns the mean batch loss.
pub fn train_epoch<O: Objective + ?Sized>(
    model: &mut AtlasEnsemble,
    objective: &O,
    train: &[usize],
    optimizer: &mut AdamW,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mut order = train.to_vec();
    order.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0;
    for batch in order.chunks(cfg.batch_size) {
        model.zero_grad();
        let loss = objective.train_batch(model, batch, rng)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss);
        }
        optimizer.step(model, cfg.learning_rate, cfg.weight_decay)?;
        model.zero_grad();
        total += loss;
        batches += 1;
    }
    Ok(total / batches as f64)
}

/// Trains with early stopping on validation loss and restores the best
/// epoch's parameters. Epoch `e` draws from stream `("epoch", e)` of
/// `cfg.seed`.
pub fn fit<O: Objective + ?Sized>(
    mut model: AtlasEnsemble,
    objective: &O,
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    if model.mode() != objective.head_mode() {
        return Err(ModelError::HeadAbsent {
            expected: objective.head_mode(),
            actual: model.mode(),
        }
        .into());
    }
    model.set_dropout(cfg.dropout_rate);
    let mut optimizer = AdamW::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = model.flat_values();
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let mut rng = seed::stream(cfg.seed, "epoch", epoch as u64);
        let train_loss = train_epoch(&mut model, objective, train, &mut optimizer, cfg, &mut rng)?;
        let val_loss = objective.eval_loss(&model, val)?;
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = model.flat_values();
            since_best = 0;
        } else {
            since_best += 1;
        }
        stopped_early = since_best >= cfg.patience;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            stopped_early,
            best_epoch,
        });
        if stopped_early {
            break;
        }
    }
    model.set_flat_values(&best_params);
    Ok(FitResult {
        model,
        history,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
    })
}

/// Supervised training (fine-tuning or from scratch).
pub fn fit_classifier(
    model: AtlasEnsemble,
    examples: &[Example],
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
) -> Result<FitResult> {
    let objective = ClassifyObjective::new(examples, cfg);
    fit(model, &objective, train, val, cfg)
}

/// Self-supervised masked-imputation pretraining. Takes feature views only;
/// labels are not reachable from here.
pub fn pretrain(
    model: AtlasEnsemble,
    views: Vec<&[Vec<f64>]>,
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
) -> Result<FitResult> {
    if cfg.phase != Phase::Pretrain {
        return Err(TrainError::InvalidConfig(format!(
            "pretrain called with phase {:?}",
            cfg.phase
        )));
    }
    let objective = ImputeObjective::new(views, cfg.mask_ratio, val, cfg.seed);
    fit(model, &objective, train, val, cfg)
}
