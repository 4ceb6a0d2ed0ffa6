use std::fmt;

use serde::{Deserialize, Serialize};

use super::folds::{fold_fingerprint, stratified_kfold, FoldAssignment};
use super::report::CvReport;
use super::{EvalError, MetricSet, Result};
use crate::data::{AtlasSpec, Cohort, StandardizerState};
use crate::model::{AtlasEnsemble, HeadMode, ModelConfig};
use crate::nn::{checkpoint, ParamVisitor, Tensor};
use crate::train::{fit_classifier, grid_search, pretrain, Example, GridSpec, Phase, TrainConfig};
use crate::{par, seed};

/// A model configuration compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// The three-atlas ensemble.
    MetaFormer { pretrained: bool },
    /// One single-atlas transformer, by position in the atlas list.
    Sat { atlas: usize, pretrained: bool },
}

fn normalize(s: &str) -> String {
    s.to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

impl Variant {
    pub fn pretrained(&self) -> bool {
        match *self {
            Variant::MetaFormer { pretrained } | Variant::Sat { pretrained, .. } => pretrained,
        }
    }

    /// Report name, e.g. `METAFormer PT` or `SAT (CC200)`.
    pub fn name(&self, atlases: &[AtlasSpec]) -> String {
        let base = match *self {
            Variant::MetaFormer { .. } => "METAFormer".to_string(),
            Variant::Sat { atlas, .. } => format!("SAT ({})", atlases[atlas].name),
        };
        if self.pretrained() {
            base + " PT"
        } else {
            base
        }
    }

    /// Scratch and PT variants of one architecture share this key and hence
    /// their initialization and fine-tuning seeds.
    fn arch_key(&self, atlases: &[AtlasSpec]) -> String {
        match *self {
            Variant::MetaFormer { .. } => "metaformer".into(),
            Variant::Sat { atlas, .. } => format!("sat-{}", atlases[atlas].name.to_ascii_lowercase()),
        }
    }

    fn atlas_indices(&self, n_atlases: usize) -> Vec<usize> {
        match *self {
            Variant::MetaFormer { .. } => (0..n_atlases).collect(),
            Variant::Sat { atlas, .. } => vec![atlas],
        }
    }

    /// Accepts report names and loose spellings such as `metaformer-pt` or
    /// `sat_cc200`.
    pub fn parse(s: &str, atlases: &[AtlasSpec]) -> Result<Self> {
        let norm = normalize(s);
        let (body, pretrained) = match norm.strip_suffix(" pt") {
            Some(b) => (b.to_string(), true),
            None => (norm.clone(), false),
        };
        if body == "metaformer" {
            return Ok(Variant::MetaFormer { pretrained });
        }
        if let Some(name) = body.strip_prefix("sat ") {
            if let Some(atlas) = atlases.iter().position(|a| normalize(&a.name) == name) {
                return Ok(Variant::Sat { atlas, pretrained });
            }
        }
        Err(EvalError::UnknownVariant(s.to_string()))
    }

    /// Every variant over the given atlases: both ensembles, then each SAT
    /// without and with pretraining.
    pub fn all(n_atlases: usize) -> Vec<Variant> {
        let mut out = vec![
            Variant::MetaFormer { pretrained: false },
            Variant::MetaFormer { pretrained: true },
        ];
        for atlas in 0..n_atlases {
            out.push(Variant::Sat { atlas, pretrained: false });
            out.push(Variant::Sat { atlas, pretrained: true });
        }
        out
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Supervised phase settings (fine-tuning and scratch training).
    pub train: TrainConfig,
    /// Imputation pretraining settings.
    pub pretrain: TrainConfig,
    pub folds: usize,
    pub val_fraction: f64,
    /// When set, the supervised hyperparameters are re-tuned per fold.
    pub grid: Option<GridSpec>,
    pub seed: u64,
    /// Keep per-fold checkpoints and training histories in the outcome.
    pub keep_artifacts: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig, train: TrainConfig, seed: u64) -> Self {
        let pretrain = train.with_phase(Phase::Pretrain);
        Self {
            model,
            train,
            pretrain,
            folds: 10,
            val_fraction: 0.3,
            grid: None,
            seed,
            keep_artifacts: false,
        }
    }
}

/// Index sets touched by each training-side computation of one variant in
/// one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageAudit {
    pub fold_id: usize,
    pub variant: String,
    pub test: Vec<usize>,
    pub stages: Vec<(String, Vec<usize>)>,
}

impl LeakageAudit {
    fn record(&mut self, stage: &str, indices: &[usize]) {
        self.stages.push((stage.to_string(), indices.to_vec()));
    }

    fn stage(&self, name: &str) -> &[usize] {
        self.stages
            .iter()
            .find(|(s, _)| s == name)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    /// Fails if any recorded stage shares an index with the test fold.
    pub fn check(&self) -> Result<()> {
        let mut in_test = vec![false; self.test.iter().map(|&i| i + 1).max().unwrap_or(0)];
        for &i in &self.test {
            in_test[i] = true;
        }
        for (stage, indices) in &self.stages {
            if let Some(&i) = indices.iter().find(|&&i| in_test.get(i).copied().unwrap_or(false)) {
                return Err(EvalError::Leakage(format!(
                    "{stage} of {} in fold {} (subject index {i})",
                    self.variant, self.fold_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub reports: Vec<CvReport>,
    pub folds: Vec<FoldAssignment>,
    pub fingerprint: u64,
    /// Fingerprint rebuilt from the splits each variant actually trained and
    /// tested on, in variant order.
    pub variant_fingerprints: Vec<u64>,
    pub audits: Vec<LeakageAudit>,
    /// `(relative path, bytes)` pairs, present when artifacts are kept.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

struct VariantFold {
    metrics: MetricSet,
    audit: LeakageAudit,
    artifacts: Vec<(String, Vec<u8>)>,
}

fn slug(name: &str) -> String {
    normalize(name).replace(' ', "-")
}

fn standardized_examples(cohort: &Cohort, labels: &[usize], train: &[usize], fold_id: usize) -> Result<Vec<Example>> {
    let states = (0..cohort.atlases.len())
        .map(|a| {
            let fit_on: Vec<_> = train.iter().map(|&s| &cohort.subjects[s].connectomes[a]).collect();
            StandardizerState::fit(&fit_on, format!("fold {fold_id} train"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    cohort
        .subjects
        .iter()
        .zip(labels)
        .map(|(s, &label)| {
            let views = s
                .connectomes
                .iter()
                .zip(&states)
                .map(|(c, st)| st.apply(c).map(|c| c.features))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(Example { views, label })
        })
        .collect()
}

fn build(cfg: &ModelConfig, atlases: &[usize], mode: HeadMode, rng: &mut seed::SeededRng) -> Result<AtlasEnsemble> {
    let configs: Vec<_> = atlases.iter().map(|&a| cfg.sat_config(a)).collect();
    Ok(if configs.len() == 1 {
        AtlasEnsemble::single(configs[0].clone(), mode, rng)?
    } else {
        AtlasEnsemble::metaformer(&configs, mode, rng)?
    })
}

fn test_scores(model: &AtlasEnsemble, examples: &[Example], test: &[usize]) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(test.len());
    for chunk in test.chunks(256) {
        let views = (0..model.len())
            .map(|i| {
                let rows: Vec<&[f64]> = chunk.iter().map(|&s| examples[s].views[i].as_slice()).collect();
                Tensor::from_rows(&rows)
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(crate::model::ModelError::from)?;
        let probs = model.forward_probs(&views)?;
        scores.extend((0..chunk.len()).map(|r| probs.row(r)[1]));
    }
    Ok(scores)
}

fn run_variant(
    cfg: &ExperimentConfig,
    variant: Variant,
    fold: &FoldAssignment,
    all_examples: &[Example],
) -> Result<VariantFold> {
    let atlases = &cfg.model.atlases;
    let name = variant.name(atlases);
    let key = variant.arch_key(atlases);
    let f = fold.fold_id as u64;
    let mut audit = LeakageAudit {
        fold_id: fold.fold_id,
        variant: name.clone(),
        test: fold.test.clone(),
        stages: vec![("standardizer".into(), fold.train.clone())],
    };
    let mut artifacts = Vec::new();
    let dir = format!("fold{}/{}", fold.fold_id, slug(&name));

    let chosen = variant.atlas_indices(atlases.len());
    let examples: Vec<Example> = all_examples
        .iter()
        .map(|e| Example {
            views: chosen.iter().map(|&a| e.views[a].clone()).collect(),
            label: e.label,
        })
        .collect();
    let mut init_rng = seed::stream(cfg.seed, &format!("init/{key}"), f);

    let model = if variant.pretrained() {
        let pt_model = build(&cfg.model, &chosen, HeadMode::Impute, &mut init_rng)?;
        let pt_cfg = TrainConfig {
            seed: seed::derive(cfg.seed, &format!("pretrain/{key}"), f),
            phase: Phase::Pretrain,
            ..cfg.pretrain.clone()
        };
        let views: Vec<&[Vec<f64>]> = examples.iter().map(|e| e.views.as_slice()).collect();
        audit.record("pretrain.train", &fold.train);
        audit.record("pretrain.val", &fold.val);
        let result = pretrain(pt_model, views, &fold.train, &fold.val, &pt_cfg)?;
        if cfg.keep_artifacts {
            artifacts.push((format!("{dir}/pretrain.history.csv"), result.history_csv().into_bytes()));
        }
        let mut head_rng = seed::stream(cfg.seed, &format!("head/{key}"), f);
        result.model.transfer_pretrained(&mut head_rng)
    } else {
        build(&cfg.model, &chosen, HeadMode::Classify, &mut init_rng)?
    };

    let template = TrainConfig {
        seed: seed::derive(cfg.seed, &format!("finetune/{key}"), f),
        phase: if variant.pretrained() { Phase::Finetune } else { Phase::Scratch },
        ..cfg.train.clone()
    };
    let train_cfg = match &cfg.grid {
        Some(grid) => {
            audit.record("grid.train", &fold.train);
            audit.record("grid.val", &fold.val);
            let outcome = grid_search(grid, &template, |point| {
                Ok(fit_classifier(model.clone(), &examples, &fold.train, &fold.val, point)?.best_val_loss)
            })?;
            outcome.best
        }
        None => template,
    };
    audit.record("finetune.train", &fold.train);
    audit.record("finetune.val", &fold.val);
    let result = fit_classifier(model, &examples, &fold.train, &fold.val, &train_cfg)?;
    audit.check()?;

    let scores = test_scores(&result.model, &examples, &fold.test)?;
    let labels: Vec<usize> = fold.test.iter().map(|&s| examples[s].label).collect();
    let metrics = MetricSet::from_scores(&scores, &labels)?;
    if cfg.keep_artifacts {
        artifacts.push((format!("{dir}/history.csv"), result.history_csv().into_bytes()));
        let bytes = checkpoint::encode(&result.model).map_err(|e| EvalError::Report(e.to_string()))?;
        artifacts.push((format!("{dir}/model.ckpt"), bytes));
    }
    debug_assert!(result.model.flat_values().iter().all(|v| v.is_finite()));
    Ok(VariantFold {
        metrics,
        audit,
        artifacts,
    })
}

/// Stratified k-fold evaluation of every variant on one shared partition.
/// Per fold, features are standardized with statistics from the fold's
/// training portion only; PT variants pretrain on that same portion before
/// fine-tuning. Folds run through [`par::map_indexed`] and are merged by
/// fold index.
pub fn run_cv_experiment(cohort: &Cohort, variants: &[Variant], cfg: &ExperimentConfig) -> Result<CvOutcome> {
    cfg.model.validate()?;
    if cohort.atlases != cfg.model.atlases {
        return Err(EvalError::InvalidArgument("cohort atlases differ from the model config".into()));
    }
    if variants.is_empty() {
        return Err(EvalError::InvalidArgument("no variants requested".into()));
    }
    for v in variants {
        match *v {
            Variant::MetaFormer { .. } if cfg.model.atlases.len() != 3 => {
                return Err(EvalError::InvalidArgument("METAFormer variants need exactly 3 atlases".into()))
            }
            Variant::Sat { atlas, .. } if atlas >= cfg.model.atlases.len() => {
                return Err(EvalError::InvalidArgument(format!("atlas index {atlas} out of range")))
            }
            _ => {}
        }
    }
    let labels: Vec<usize> = cohort.labels().iter().map(|l| l.index()).collect();
    let folds = stratified_kfold(&labels, cfg.folds, cfg.val_fraction, seed::derive(cfg.seed, "folds", 0))?;
    let per_fold: Vec<Result<Vec<VariantFold>>> = par::map_indexed(folds.len(), |i| {
        let fold = &folds[i];
        let examples = standardized_examples(cohort, &labels, &fold.train, fold.fold_id)?;
        variants.iter().map(|&v| run_variant(cfg, v, fold, &examples)).collect()
    });
    let per_fold = per_fold.into_iter().collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity(variants.len());
    let mut variant_fingerprints = Vec::with_capacity(variants.len());
    let mut audits = Vec::new();
    let mut artifacts = Vec::new();
    for (vi, v) in variants.iter().enumerate() {
        let used: Vec<FoldAssignment> = per_fold
            .iter()
            .map(|fold| {
                let a = &fold[vi].audit;
                FoldAssignment {
                    fold_id: a.fold_id,
                    test: a.test.clone(),
                    train: a.stage("finetune.train").to_vec(),
                    val: a.stage("finetune.val").to_vec(),
                }
            })
            .collect();
        variant_fingerprints.push(fold_fingerprint(&used));
        reports.push(CvReport {
            variant: v.name(&cfg.model.atlases),
            folds: per_fold.iter().map(|fold| fold[vi].metrics).collect(),
        });
    }
    for fold in per_fold {
        for vf in fold {
            audits.push(vf.audit);
            artifacts.extend(vf.artifacts);
        }
    }
    Ok(CvOutcome {
        reports,
        fingerprint: fold_fingerprint(&folds),
        folds,
        variant_fingerprints,
        audits,
        artifacts,
    })
}
