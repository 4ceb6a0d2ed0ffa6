//! Command-line front end.
//!
//! Every command writes into `--out`, marks the directory with a
//! `.incomplete` sentinel while running, and finishes by writing `run.json`
//! with the resolved configuration. Only `run.json` carries a timestamp, so
//! reruns with the same inputs and seed reproduce every other file byte for
//! byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::io::{read_connectome, read_timeseries, timeseries_width, write_connectome, write_timeseries};
use crate::data::manifest::{render_manifest, ATLAS_SLOTS};
use crate::data::synth::generate_synthetic;
use crate::data::{connectome_from_series, load_manifest, AtlasSpec, Cohort, DataError, Label, StandardizerState, Subject, SynthConfig};
use crate::eval::{
    fold_csv, read_fold_csv, render_table, run_cv_experiment, summary_csv, train_val_split, EvalError, ExperimentConfig, Variant,
};
use crate::model::{AtlasEnsemble, HeadMode, ModelConfig, ModelError};
use crate::nn::checkpoint;
use crate::train::{fit_classifier, grid_search, pretrain, Example, GridSpec, Phase, TrainConfig, TrainError};
use crate::{par, seed};

pub const SENTINEL: &str = ".incomplete";
pub const ATLASES_FILE: &str = "atlases.json";
pub const SUBJECTS_FILE: &str = "subjects.csv";

#[derive(Debug, Parser)]
#[command(name = "metaformer", version, about = "Multi-atlas transformer ensemble for connectome classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
    /// Global seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads. Results do not depend on this value.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort: manifest plus time-series CSVs.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Compute connectome caches for every subject of a manifest.
    Connectome {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Masked-imputation pretraining on a stratified train split.
    Pretrain {
        /// Connectome directory written by `connectome`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "METAFormer")]
        variant: String,
        #[command(flatten)]
        common: Common,
    },
    /// Supervised training on a stratified train/validation split.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "METAFormer")]
        variant: String,
        /// Pretrained checkpoint to fine-tune from.
        #[arg(long)]
        init: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Stratified k-fold cross-validation of one or more variants.
    Cv {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated variant names; all eight by default.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Hyperparameter grid search on one train/validation split.
    Gridsearch {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "METAFormer")]
        variant: String,
        #[command(flatten)]
        common: Common,
    },
    /// Summarize a `folds.csv` produced by `cv`.
    Report {
        /// `folds.csv` or the directory containing it.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Config file for the training commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Pretraining settings; defaults to `train` with the pretrain phase.
    pub pretrain: Option<TrainConfig>,
    pub val_fraction: f64,
    pub grid: Option<GridSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            pretrain: None,
            val_fraction: 0.3,
            grid: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0:#}")]
    Failed(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) | TrainError::Model(ModelError::InvalidConfig(_)) => CliError::Config(e.to_string()),
            e => CliError::Failed(e.into()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e).into()
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnknownVariant(_) | EvalError::InvalidArgument(_) | EvalError::ClassTooSmall { .. } => {
                CliError::Config(e.to_string())
            }
            EvalError::Train(t) => t.into(),
            EvalError::Model(m) => m.into(),
            e => CliError::Failed(e.into()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidConfig { .. } => CliError::Config(e.to_string()),
            e => CliError::Failed(e.into()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// An output directory being filled. The sentinel is removed by `finish`.
struct Output {
    dir: PathBuf,
}

impl Output {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join(SENTINEL), "")?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        write(&self.dir.join(rel), bytes)
    }

    fn finish(self, command: &str, resolved: serde_json::Value) -> Result<()> {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let run = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "finished_unix": timestamp,
            "config": resolved,
        });
        self.write("run.json", serde_json::to_string_pretty(&run).expect("json") + "\n")?;
        fs::remove_file(self.dir.join(SENTINEL)).context("removing sentinel")?;
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Report { .. } => 1,
        Command::Synth { common }
        | Command::Connectome { common, .. }
        | Command::Pretrain { common, .. }
        | Command::Train { common, .. }
        | Command::Cv { common, .. }
        | Command::Gridsearch { common, .. } => common.threads,
    };
    if threads == 0 {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    par::with_threads(threads, move || match cli.command {
        Command::Synth { common } => cmd_synth(&common),
        Command::Connectome { manifest, common } => cmd_connectome(&manifest, &common),
        Command::Pretrain { data, variant, common } => cmd_pretrain(&data, &variant, &common),
        Command::Train {
            data,
            variant,
            init,
            common,
        } => cmd_train(&data, &variant, init.as_deref(), &common),
        Command::Cv {
            data,
            variants,
            folds,
            common,
        } => cmd_cv(&data, &variants, folds, &common),
        Command::Gridsearch { data, variant, common } => cmd_gridsearch(&data, &variant, &common),
        Command::Report { input, out } => cmd_report(&input, &out),
    })
}

fn default_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_asd: 150,
        n_tc: 150,
        atlases: vec![
            AtlasSpec::new("AAL", 16).expect("k >= 2"),
            AtlasSpec::new("CC200", 20).expect("k >= 2"),
            AtlasSpec::new("DOS160", 24).expect("k >= 2"),
        ],
        t_len: 100,
        delta: 0.3,
        seed,
    }
}

/// Writes `timeseries/<id>.<atlas>.csv`, `manifest.csv` and `atlases.json`.
pub fn cmd_synth(common: &Common) -> Result<()> {
    let cfg = match &common.config {
        Some(p) => read_json::<SynthConfig>(p)?,
        None => default_synth(common.seed),
    };
    cfg.validate()?;
    if cfg.atlases.len() != ATLAS_SLOTS.len() {
        return Err(CliError::Config(format!(
            "invalid config field `atlases`: the manifest holds exactly {} atlases, got {}",
            ATLAS_SLOTS.len(),
            cfg.atlases.len()
        )));
    }
    let out = Output::open(&common.out)?;
    let subjects = generate_synthetic(&cfg)?;
    let mut rows = Vec::with_capacity(subjects.len());
    fs::create_dir_all(common.out.join("timeseries")).context("creating timeseries directory")?;
    for s in &subjects {
        let mut paths: [String; 3] = Default::default();
        for (slot, ts) in s.series.iter().enumerate() {
            let rel = format!("timeseries/{}.{}.csv", s.subject_id, ts.atlas.name.to_lowercase());
            write_timeseries(&common.out.join(&rel), ts)?;
            paths[slot] = rel;
        }
        rows.push((s.subject_id.clone(), s.label, paths));
    }
    out.write("manifest.csv", render_manifest(&rows))?;
    out.write(ATLASES_FILE, serde_json::to_string_pretty(&cfg.atlases).expect("json") + "\n")?;
    out.finish("synth", json!({ "synth": cfg }))
}

/// Atlases for a manifest: `atlases.json` beside it when present, otherwise
/// the standard slot names with k read from the first subject's files.
fn manifest_atlases(manifest: &Path, first_paths: &[PathBuf; 3]) -> Result<Vec<AtlasSpec>> {
    let beside = manifest.parent().unwrap_or(Path::new(".")).join(ATLASES_FILE);
    if beside.exists() {
        return read_json(&beside);
    }
    ATLAS_SLOTS
        .iter()
        .zip(first_paths)
        .map(|(name, p)| Ok(AtlasSpec::new(*name, timeseries_width(p)?)?))
        .collect()
}

/// Writes one `<id>.<atlas>.fc.csv` per subject and atlas, plus
/// `subjects.csv` and `atlases.json` describing the cache.
pub fn cmd_connectome(manifest: &Path, common: &Common) -> Result<()> {
    let rows = load_manifest(manifest).map_err(|e| CliError::Config(format!("{}: {e}", manifest.display())))?;
    let first = rows.first().ok_or_else(|| CliError::Config("manifest has no subjects".into()))?;
    let atlases = manifest_atlases(manifest, &first.paths)?;
    let out = Output::open(&common.out)?;
    let results: Vec<Result<()>> = par::map_indexed(rows.len(), |i| {
        let row = &rows[i];
        for (atlas, path) in atlases.iter().zip(&row.paths) {
            let c = read_timeseries(path, &row.subject_id, atlas)
                .and_then(|ts| connectome_from_series(&ts))
                .with_context(|| format!("subject {} ({})", row.subject_id, atlas.name))?;
            write_connectome(&common.out, &c)?;
        }
        Ok(())
    });
    results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut subjects = String::from("subject_id,label\n");
    for r in &rows {
        subjects.push_str(&format!("{},{}\n", r.subject_id, r.label));
    }
    out.write(SUBJECTS_FILE, subjects)?;
    out.write(ATLASES_FILE, serde_json::to_string_pretty(&atlases).expect("json") + "\n")?;
    out.finish(
        "connectome",
        json!({ "manifest": manifest, "atlases": atlases, "subjects": rows.len() }),
    )
}

/// Loads a connectome directory written by `cmd_connectome`.
pub fn load_cohort(dir: &Path) -> Result<Cohort> {
    let atlases: Vec<AtlasSpec> = read_json(&dir.join(ATLASES_FILE))?;
    let path = dir.join(SUBJECTS_FILE);
    let mut rdr = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut ids = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let label: Label = rec[1].parse().map_err(|m: String| anyhow!("{}: {m}", path.display()))?;
        ids.push((rec[0].to_string(), label));
    }
    let subjects: Vec<Result<Subject>> = par::map_indexed(ids.len(), |i| {
        let (id, label) = &ids[i];
        let connectomes = atlases
            .iter()
            .map(|a| read_connectome(dir, id, a))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Subject::new(id.clone(), *label, connectomes)?)
    });
    let subjects = subjects.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Cohort::new(atlases, subjects)?)
}

fn load_run_config(common: &Common, cohort: &Cohort) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => read_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    if cfg.model.atlases.is_empty() {
        cfg.model.atlases = cohort.atlases.clone();
    } else if cfg.model.atlases != cohort.atlases {
        return Err(CliError::Config("model atlases differ from the data's atlases".into()));
    }
    cfg.model.validate()?;
    cfg.train.validate()?;
    if let Some(p) = &cfg.pretrain {
        p.validate()?;
    }
    Ok(cfg)
}

/// Stratified split over all subjects plus examples standardized with the
/// training subjects' statistics, restricted to the variant's atlases.
struct Prepared {
    examples: Vec<Example>,
    train: Vec<usize>,
    val: Vec<usize>,
    atlas_indices: Vec<usize>,
}

fn prepare(cohort: &Cohort, variant: Variant, val_fraction: f64, seed: u64) -> Result<Prepared> {
    let labels: Vec<usize> = cohort.labels().iter().map(|l| l.index()).collect();
    let all: Vec<usize> = (0..labels.len()).collect();
    let (train, val) = train_val_split(&labels, &all, val_fraction, seed::derive(seed, "val-split", 0))?;
    let atlas_indices = match variant {
        Variant::MetaFormer { .. } => (0..cohort.atlases.len()).collect(),
        Variant::Sat { atlas, .. } => vec![atlas],
    };
    let states = atlas_indices
        .iter()
        .map(|&a| {
            let fit_on: Vec<_> = train.iter().map(|&s| &cohort.subjects[s].connectomes[a]).collect();
            StandardizerState::fit(&fit_on, "train split")
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let examples = cohort
        .subjects
        .iter()
        .zip(&labels)
        .map(|(s, &label)| {
            let views = atlas_indices
                .iter()
                .zip(&states)
                .map(|(&a, st)| st.apply(&s.connectomes[a]).map(|c| c.features))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(Example { views, label })
        })
        .collect::<std::result::Result<Vec<_>, DataError>>()?;
    Ok(Prepared {
        examples,
        train,
        val,
        atlas_indices,
    })
}

fn build_model(cfg: &ModelConfig, atlas_indices: &[usize], mode: HeadMode, seed: u64) -> Result<AtlasEnsemble> {
    let mut rng = seed::stream(seed, "init", 0);
    let configs: Vec<_> = atlas_indices.iter().map(|&a| cfg.sat_config(a)).collect();
    Ok(if configs.len() == 1 {
        AtlasEnsemble::single(configs[0].clone(), mode, &mut rng)?
    } else {
        AtlasEnsemble::metaformer(&configs, mode, &mut rng)?
    })
}

fn ckpt_bytes(model: &AtlasEnsemble) -> Result<Vec<u8>> {
    checkpoint::encode(model).map_err(|e| CliError::Failed(e.into()))
}

/// Writes `pretrained.ckpt` (imputation heads) and `history.csv`.
pub fn cmd_pretrain(data: &Path, variant: &str, common: &Common) -> Result<()> {
    let cohort = load_cohort(data)?;
    let cfg = load_run_config(common, &cohort)?;
    let variant = Variant::parse(variant, &cohort.atlases)?;
    let pt_cfg = TrainConfig {
        seed: seed::derive(common.seed, "pretrain", 0),
        phase: Phase::Pretrain,
        ..cfg.pretrain.clone().unwrap_or_else(|| cfg.train.clone())
    };
    pt_cfg.validate()?;
    let out = Output::open(&common.out)?;
    let prep = prepare(&cohort, variant, cfg.val_fraction, common.seed)?;
    let model = build_model(&cfg.model, &prep.atlas_indices, HeadMode::Impute, common.seed)?;
    let views: Vec<&[Vec<f64>]> = prep.examples.iter().map(|e| e.views.as_slice()).collect();
    let result = pretrain(model, views, &prep.train, &prep.val, &pt_cfg)?;
    out.write("pretrained.ckpt", ckpt_bytes(&result.model)?)?;
    out.write("history.csv", result.history_csv())?;
    out.finish(
        "pretrain",
        json!({
            "data": data, "variant": variant.name(&cohort.atlases), "seed": common.seed,
            "threads": common.threads, "run": cfg, "pretrain": pt_cfg,
            "best_epoch": result.best_epoch, "best_val_loss": result.best_val_loss,
        }),
    )
}

/// Writes `initial.ckpt`, `model.ckpt` and `history.csv`.
pub fn cmd_train(data: &Path, variant: &str, init: Option<&Path>, common: &Common) -> Result<()> {
    let cohort = load_cohort(data)?;
    let cfg = load_run_config(common, &cohort)?;
    let variant = Variant::parse(variant, &cohort.atlases)?;
    let out = Output::open(&common.out)?;
    let prep = prepare(&cohort, variant, cfg.val_fraction, common.seed)?;
    let model = match init {
        Some(path) => {
            let entries = checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            let mut model = build_model(&cfg.model, &prep.atlas_indices, HeadMode::Impute, common.seed)?;
            checkpoint::load_into(&mut model, &entries, true).with_context(|| format!("loading {}", path.display()))?;
            model.transfer_pretrained(&mut seed::stream(common.seed, "head", 0))
        }
        None => build_model(&cfg.model, &prep.atlas_indices, HeadMode::Classify, common.seed)?,
    };
    let train_cfg = TrainConfig {
        seed: seed::derive(common.seed, "train", 0),
        phase: if init.is_some() { Phase::Finetune } else { Phase::Scratch },
        ..cfg.train.clone()
    };
    out.write("initial.ckpt", ckpt_bytes(&model)?)?;
    let result = fit_classifier(model, &prep.examples, &prep.train, &prep.val, &train_cfg)?;
    out.write("model.ckpt", ckpt_bytes(&result.model)?)?;
    out.write("history.csv", result.history_csv())?;
    out.finish(
        "train",
        json!({
            "data": data, "variant": variant.name(&cohort.atlases), "init": init, "seed": common.seed,
            "threads": common.threads, "run": cfg, "train": train_cfg,
            "best_epoch": result.best_epoch, "best_val_loss": result.best_val_loss,
        }),
    )
}

/// Writes `grid.csv` with one row per grid point and `best.json`.
pub fn cmd_gridsearch(data: &Path, variant: &str, common: &Common) -> Result<()> {
    let cohort = load_cohort(data)?;
    let cfg = load_run_config(common, &cohort)?;
    let variant = Variant::parse(variant, &cohort.atlases)?;
    let grid = cfg.grid.clone().unwrap_or_default();
    let template = TrainConfig {
        seed: seed::derive(common.seed, "train", 0),
        ..cfg.train.clone()
    };
    let out = Output::open(&common.out)?;
    let prep = prepare(&cohort, variant, cfg.val_fraction, common.seed)?;
    let model = build_model(&cfg.model, &prep.atlas_indices, HeadMode::Classify, common.seed)?;
    let outcome = grid_search(&grid, &template, |point| {
        Ok(fit_classifier(model.clone(), &prep.examples, &prep.train, &prep.val, point)?.best_val_loss)
    })?;
    let mut csv = String::from("index,learning_rate,weight_decay,dropout_rate,seed,val_loss\n");
    for (i, (p, score)) in grid.points(&template).iter().zip(&outcome.scores).enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{score}\n",
            p.learning_rate, p.weight_decay, p.dropout_rate, p.seed
        ));
    }
    out.write("grid.csv", csv)?;
    out.write("best.json", serde_json::to_string_pretty(&outcome.best).expect("json") + "\n")?;
    out.finish(
        "gridsearch",
        json!({
            "data": data, "variant": variant.name(&cohort.atlases), "seed": common.seed,
            "threads": common.threads, "run": cfg, "grid": grid, "best_index": outcome.best_index,
        }),
    )
}

/// Writes `folds.csv`, `summary.csv`, `table.txt` and per-fold
/// checkpoints and histories under `fold<i>/<variant>/`.
pub fn cmd_cv(data: &Path, variants: &[String], folds: usize, common: &Common) -> Result<()> {
    let cohort = load_cohort(data)?;
    let cfg = load_run_config(common, &cohort)?;
    let variants = if variants.is_empty() {
        Variant::all(cohort.atlases.len())
            .into_iter()
            .filter(|v| cohort.atlases.len() == 3 || matches!(v, Variant::Sat { .. }))
            .collect()
    } else {
        variants
            .iter()
            .map(|v| Variant::parse(v.trim(), &cohort.atlases))
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    let experiment = ExperimentConfig {
        model: cfg.model.clone(),
        train: cfg.train.clone(),
        pretrain: cfg.pretrain.clone().unwrap_or_else(|| cfg.train.with_phase(Phase::Pretrain)),
        folds,
        val_fraction: cfg.val_fraction,
        grid: cfg.grid.clone(),
        seed: common.seed,
        keep_artifacts: true,
    };
    let out = Output::open(&common.out)?;
    let outcome = run_cv_experiment(&cohort, &variants, &experiment)?;
    for (rel, bytes) in &outcome.artifacts {
        out.write(rel, bytes)?;
    }
    out.write("folds.csv", fold_csv(&outcome.reports))?;
    out.write("summary.csv", summary_csv(&outcome.reports))?;
    out.write("table.txt", render_table(&outcome.reports))?;
    print!("{}", render_table(&outcome.reports));
    out.finish(
        "cv",
        json!({
            "data": data, "seed": common.seed, "threads": common.threads,
            "variants": variants.iter().map(|v| v.name(&cohort.atlases)).collect::<Vec<_>>(),
            "experiment": experiment, "fold_fingerprint": format!("{:016x}", outcome.fingerprint),
        }),
    )
}

/// Writes `summary.csv` and `table.txt` from a `folds.csv`.
pub fn cmd_report(input: &Path, out_dir: &Path) -> Result<()> {
    let path = if input.is_dir() { input.join("folds.csv") } else { input.to_path_buf() };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let reports = read_fold_csv(&text)?;
    let out = Output::open(out_dir)?;
    out.write("summary.csv", summary_csv(&reports))?;
    let table = render_table(&reports);
    out.write("table.txt", &table)?;
    print!("{table}");
    out.finish("report", json!({ "input": path }))
}
