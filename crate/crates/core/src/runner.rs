//! Experiment orchestration: a flat TOML config, training, evaluation on clean
//! and corrupted test data, and the on-disk artifacts.
//!
//! Every run writes four files with fixed names into its output directory:
//! `metrics.json`, `train_log.csv`, `checkpoint.bin` and `effective_config`
//! (the config with every default filled in).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::write_checkpoint;
use crate::data::{
    gen_multiview, load_csv_dataset, CsvOptions, Dataset, MultiViewSpec, Split, SplitCounts, SplitFractions,
};
use crate::engine::{
    gaussian_wgd_sample, sample_moments, EpochRecord, Ensemble, GaussianTarget, OptimizerKind, Space, TrainConfig,
    Trainer,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{evaluate, temperature_scale, MetricsReport, DEFAULT_BINS};
use crate::parallel::{run_parallel, CommReport, ParallelOptions};
use crate::priors::{Bandwidth, KernelSpec, PriorFamily, PriorSpec};
use crate::rng::{streams, RngState};

pub const OUTPUT_ROOT_ENV: &str = "FWGD_OUTPUT_ROOT";
pub const METRICS_FILE: &str = "metrics.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config";

/// Multi-view experiment used by the acceptance checks, feature-space WGD.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/multiview_feature.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthKey {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Multiview,
    Csv,
}

/// The config file schema. Every key is optional; missing keys take the
/// defaults of the chosen `space`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: Option<Space>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub feature_dim: Option<usize>,
    pub prior: Option<PriorFamily>,
    pub prior_inverse_scale: Option<f64>,
    pub prior_scale: Option<f64>,
    /// `"median"` or a fixed positive bandwidth.
    pub bandwidth: Option<BandwidthKey>,
    pub r: Option<usize>,
    pub projection: Option<bool>,
    pub repulsion: Option<bool>,
    pub share_classifier: Option<bool>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub weight_decay: Option<f64>,
    pub lr_decay_epochs: Option<Vec<usize>>,
    pub lr_decay_ratio: Option<f64>,
    /// Worker threads for feature space; 1 runs the sequential engine.
    pub workers: Option<usize>,

    pub dataset: Option<DatasetKind>,
    pub data_seed: Option<u64>,
    pub csv_path: Option<PathBuf>,
    pub csv_classes: Option<usize>,
    pub split_train: Option<f64>,
    pub split_val: Option<f64>,
    pub split_test: Option<f64>,
    pub mv_classes: Option<usize>,
    pub mv_views: Option<usize>,
    pub mv_view_dim: Option<usize>,
    pub mv_input_dim: Option<usize>,
    pub mv_noise: Option<f64>,
    pub mv_strength_min: Option<f64>,
    pub mv_strength_max: Option<f64>,
    pub mv_view_scale: Option<Vec<f64>>,
    pub mv_single_view_fraction: Option<f64>,
    pub n_train: Option<usize>,
    pub n_val: Option<usize>,
    pub n_test: Option<usize>,
    /// View removed from the corrupted test copy.
    pub corrupt_view: Option<usize>,

    pub ece_bins: Option<usize>,
    pub temperature_scaling: Option<bool>,
    pub output_dir: Option<PathBuf>,
    /// Write `checkpoint.bin` every this many epochs; 0 writes only the final one.
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    MultiView {
        spec: MultiViewSpec,
        counts: SplitCounts,
        corrupt_view: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        options: CsvOptions,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSpec {
    pub bins: usize,
    pub temperature_scaling: bool,
}

/// A validated config with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub train: TrainConfig,
    pub workers: usize,
    pub data: DataSource,
    pub eval: EvalSpec,
    pub output_dir: PathBuf,
    pub checkpoint_every: usize,
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::config("config", e.to_string())
}

/// Sets `key` from a `key=value` override. The value is read as a TOML value
/// and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let spec = spec.trim_start_matches("--");
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec.to_string(), "overrides look like --key=value"))?;
    let key = key.trim().replace('-', "_");
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    table.insert(key, value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(parse_err)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table).try_into().map_err(parse_err)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(parse_err)
    }

    /// Resolves defaults and validates every field before any compute.
    pub fn resolve(&self) -> Result<Experiment> {
        let space = self.space.unwrap_or(Space::Feature);
        let d = TrainConfig::defaults_for(space);
        let prior = PriorSpec {
            family: self.prior.unwrap_or(d.prior.family),
            inverse_scale: self.prior_inverse_scale.unwrap_or(d.prior.inverse_scale),
        };
        let bandwidth = match &self.bandwidth {
            None => Bandwidth::MedianHeuristic,
            Some(BandwidthKey::Named(s)) if s == "median" => Bandwidth::MedianHeuristic,
            Some(BandwidthKey::Named(s)) => {
                return Err(Error::config("bandwidth", format!("`{s}` is neither \"median\" nor a number")))
            }
            Some(BandwidthKey::Fixed(h)) => Bandwidth::Fixed(*h),
        };
        let train = TrainConfig {
            space,
            n: self.n.unwrap_or(d.n),
            hidden: self.hidden.clone().unwrap_or(d.hidden),
            feature_dim: self.feature_dim.unwrap_or(d.feature_dim),
            prior,
            prior_scale: self.prior_scale.unwrap_or(d.prior_scale),
            kernel: KernelSpec { bandwidth, ..KernelSpec::default() },
            r: self.r.unwrap_or(d.r),
            projection: self.projection.unwrap_or(d.projection),
            repulsion: self.repulsion.unwrap_or(d.repulsion),
            share_classifier: self.share_classifier.unwrap_or(d.share_classifier),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            base_lr: self.lr.unwrap_or(d.base_lr),
            momentum: self.momentum.unwrap_or(d.momentum),
            optimizer: self.optimizer.unwrap_or(d.optimizer),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            lr_decay_epochs: self.lr_decay_epochs.clone().unwrap_or(d.lr_decay_epochs),
            lr_decay_ratio: self.lr_decay_ratio.unwrap_or(d.lr_decay_ratio),
            seed: self.seed.unwrap_or(d.seed),
        };
        train.validate()?;

        let workers = self.workers.unwrap_or(1);
        if workers == 0 || train.n % workers != 0 {
            return Err(Error::config("workers", format!("must divide n = {}", train.n)));
        }
        if workers > 1 && space != Space::Feature {
            return Err(Error::config("workers", "multiple workers are only supported in feature space"));
        }

        let data_seed = self.data_seed.unwrap_or(0);
        let data = match self.dataset.unwrap_or(DatasetKind::Multiview) {
            DatasetKind::Multiview => {
                if self.csv_path.is_some() {
                    return Err(Error::config("csv_path", "only valid with dataset = \"csv\""));
                }
                let base = MultiViewSpec::default();
                let views = self.mv_views.unwrap_or(base.views);
                let spec = MultiViewSpec {
                    classes: self.mv_classes.unwrap_or(base.classes),
                    views,
                    view_dim: self.mv_view_dim.unwrap_or(base.view_dim),
                    input_dim: self.mv_input_dim.unwrap_or(base.input_dim),
                    noise: self.mv_noise.unwrap_or(base.noise),
                    strength_min: self.mv_strength_min.unwrap_or(base.strength_min),
                    strength_max: self.mv_strength_max.unwrap_or(base.strength_max),
                    view_scale: self.mv_view_scale.clone().unwrap_or_else(|| vec![1.0; views]),
                    single_view_fraction: self.mv_single_view_fraction.unwrap_or(base.single_view_fraction),
                    corruption: crate::data::Corruption::None,
                };
                spec.validate()?;
                let corrupt_view = self.corrupt_view.unwrap_or(0);
                if corrupt_view >= spec.views {
                    return Err(Error::config("corrupt_view", format!("view {corrupt_view} does not exist")));
                }
                let counts = SplitCounts {
                    train: self.n_train.unwrap_or(2000),
                    val: self.n_val.unwrap_or(500),
                    test: self.n_test.unwrap_or(1000),
                };
                if counts.train == 0 || counts.test == 0 {
                    return Err(Error::config("n_train", "train and test splits must be nonempty"));
                }
                DataSource::MultiView { spec, counts, corrupt_view, seed: data_seed }
            }
            DatasetKind::Csv => {
                let path = self
                    .csv_path
                    .clone()
                    .ok_or_else(|| Error::config("csv_path", "required with dataset = \"csv\""))?;
                let f = SplitFractions::default();
                let options = CsvOptions {
                    classes: self.csv_classes,
                    fractions: SplitFractions {
                        train: self.split_train.unwrap_or(f.train),
                        val: self.split_val.unwrap_or(f.val),
                        test: self.split_test.unwrap_or(f.test),
                    },
                    seed: data_seed,
                };
                DataSource::Csv { path, options }
            }
        };

        let eval = EvalSpec {
            bins: self.ece_bins.unwrap_or(DEFAULT_BINS),
            temperature_scaling: self.temperature_scaling.unwrap_or(true),
        };
        if eval.bins == 0 {
            return Err(Error::config("ece_bins", "must be at least 1"));
        }
        if let DataSource::MultiView { counts, .. } = &data {
            if eval.temperature_scaling && counts.val == 0 {
                return Err(Error::config("n_val", "temperature scaling needs a validation split"));
            }
        }

        Ok(Experiment {
            train,
            workers,
            data,
            eval,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs/default")),
            checkpoint_every: self.checkpoint_every.unwrap_or(0),
        })
    }
}

impl Experiment {
    /// The config file that reproduces this experiment, every key present.
    pub fn to_config(&self) -> ExperimentConfig {
        let t = &self.train;
        let mut c = ExperimentConfig {
            space: Some(t.space),
            seed: Some(t.seed),
            n: Some(t.n),
            hidden: Some(t.hidden.clone()),
            feature_dim: Some(t.feature_dim),
            prior: Some(t.prior.family),
            prior_inverse_scale: Some(t.prior.inverse_scale),
            prior_scale: Some(t.prior_scale),
            bandwidth: Some(match t.kernel.bandwidth {
                Bandwidth::MedianHeuristic => BandwidthKey::Named("median".into()),
                Bandwidth::Fixed(h) => BandwidthKey::Fixed(h),
            }),
            r: Some(t.r),
            projection: Some(t.projection),
            repulsion: Some(t.repulsion),
            share_classifier: Some(t.share_classifier),
            epochs: Some(t.epochs),
            batch_size: Some(t.batch_size),
            lr: Some(t.base_lr),
            momentum: Some(t.momentum),
            optimizer: Some(t.optimizer),
            weight_decay: Some(t.weight_decay),
            lr_decay_epochs: Some(t.lr_decay_epochs.clone()),
            lr_decay_ratio: Some(t.lr_decay_ratio),
            workers: Some(self.workers),
            ece_bins: Some(self.eval.bins),
            temperature_scaling: Some(self.eval.temperature_scaling),
            output_dir: Some(self.output_dir.clone()),
            checkpoint_every: Some(self.checkpoint_every),
            ..ExperimentConfig::default()
        };
        match &self.data {
            DataSource::MultiView { spec, counts, corrupt_view, seed } => {
                c.dataset = Some(DatasetKind::Multiview);
                c.data_seed = Some(*seed);
                c.mv_classes = Some(spec.classes);
                c.mv_views = Some(spec.views);
                c.mv_view_dim = Some(spec.view_dim);
                c.mv_input_dim = Some(spec.input_dim);
                c.mv_noise = Some(spec.noise);
                c.mv_strength_min = Some(spec.strength_min);
                c.mv_strength_max = Some(spec.strength_max);
                c.mv_view_scale = Some(spec.view_scale.clone());
                c.mv_single_view_fraction = Some(spec.single_view_fraction);
                c.n_train = Some(counts.train);
                c.n_val = Some(counts.val);
                c.n_test = Some(counts.test);
                c.corrupt_view = Some(*corrupt_view);
            }
            DataSource::Csv { path, options } => {
                c.dataset = Some(DatasetKind::Csv);
                c.data_seed = Some(options.seed);
                c.csv_path = Some(path.clone());
                c.csv_classes = options.classes;
                c.split_train = Some(options.fractions.train);
                c.split_val = Some(options.fractions.val);
                c.split_test = Some(options.fractions.test);
            }
        }
        c
    }

    /// Output directory, placed under `$FWGD_OUTPUT_ROOT` when that is set and
    /// the configured path is relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

/// Loaded data: the dataset plus, for multi-view data, the corrupted test inputs.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub corrupted_test: Option<Matrix>,
}

pub fn prepare_data(exp: &Experiment) -> Result<PreparedData> {
    let prepared = match &exp.data {
        DataSource::MultiView { spec, counts, corrupt_view, seed } => {
            let mut rng = RngState::derive(*seed, streams::DATA);
            let data = gen_multiview(spec, *counts, &mut rng)?;
            let (test_x, _) = data.dataset.subset(Split::Test);
            PreparedData {
                corrupted_test: Some(spec.drop_view(&test_x, *corrupt_view)),
                dataset: data.dataset,
            }
        }
        DataSource::Csv { path, options } => PreparedData {
            dataset: load_csv_dataset(path, options)?,
            corrupted_test: None,
        },
    };
    prepared.dataset.validate(exp.eval.temperature_scaling)?;
    Ok(prepared)
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub clean: MetricsReport,
    pub corrupted: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub communication: Option<CommReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub metrics: MetricsFile,
    pub records: Vec<EpochRecord>,
    pub ensemble: Ensemble,
}

fn write_train_log(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut s = String::from("epoch,lr,mean_loglik,repulsion_norm,accuracy,steps\n");
    for r in records {
        writeln!(s, "{},{},{},{},{},{}", r.epoch, r.lr, r.mean_loglik, r.repulsion_norm, r.accuracy, r.steps)
            .expect("writing to a String");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Trains the ensemble of `exp` on the training split. Checkpoints are written
/// into `out` on the configured cadence.
pub fn train(exp: &Experiment, data: &PreparedData, out: Option<&Path>) -> Result<(Ensemble, Vec<EpochRecord>, Option<CommReport>)> {
    let ds = &data.dataset;
    let (x, y) = ds.subset(Split::Train);
    if exp.workers > 1 {
        let run = run_parallel(&exp.train, &x, &y, ds.classes, &ParallelOptions::new(exp.workers))?;
        return Ok((run.ensemble, run.records, Some(run.comm)));
    }
    let mut trainer = Trainer::new(exp.train.clone(), ds.input_dim(), ds.classes)?;
    let mut records = Vec::with_capacity(exp.train.epochs);
    for epoch in 0..exp.train.epochs {
        records.push(trainer.train_epoch(&x, &y, epoch)?);
        if let Some(dir) = out {
            if exp.checkpoint_every > 0 && (epoch + 1) % exp.checkpoint_every == 0 {
                write_checkpoint(&dir.join(CHECKPOINT_FILE), &trainer.ensemble)?;
            }
        }
    }
    Ok((trainer.ensemble, records, None))
}

/// Temperature fit on the validation split (or 1), then clean and corrupted
/// test metrics at that temperature.
pub fn evaluate_ensemble(exp: &Experiment, data: &PreparedData, ens: &Ensemble) -> Result<MetricsFile> {
    let ds = &data.dataset;
    let t = if exp.eval.temperature_scaling {
        let (vx, vy) = ds.subset(Split::Val);
        temperature_scale(&ens.member_logits(&vx)?, &vy)?
    } else {
        1.0
    };
    let (tx, ty) = ds.subset(Split::Test);
    let clean = evaluate(&ens.particles, &ens.member_logits(&tx)?, &tx, &ty, t, exp.eval.bins)?;
    let corrupted = match &data.corrupted_test {
        Some(cx) => Some(evaluate(&ens.particles, &ens.member_logits(cx)?, cx, &ty, t, exp.eval.bins)?),
        None => None,
    };
    Ok(MetricsFile { clean, corrupted, communication: None })
}

/// Full experiment: validate, train, evaluate and write all artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let exp = cfg.resolve()?;
    let out = exp.resolved_output_dir();
    fs::create_dir_all(&out)?;
    fs::write(out.join(EFFECTIVE_CONFIG_FILE), exp.to_config().to_toml()?)?;

    let data = prepare_data(&exp)?;
    let (ensemble, records, comm) = train(&exp, &data, Some(&out))?;
    let mut metrics = evaluate_ensemble(&exp, &data, &ensemble)?;
    metrics.communication = comm;

    let json = serde_json::to_string_pretty(&metrics)?;
    fs::write(out.join(METRICS_FILE), json + "\n")?;
    write_train_log(&out.join(TRAIN_LOG_FILE), &records)?;
    write_checkpoint(&out.join(CHECKPOINT_FILE), &ensemble)?;
    Ok(RunOutcome { output_dir: out, metrics, records, ensemble })
}

pub fn run_file(path: &Path, overrides: &[String]) -> Result<RunOutcome> {
    run(&ExperimentConfig::load(path, overrides)?)
}

const METRIC_NAMES: [&str; 6] = ["accuracy", "nll", "brier", "ece", "temperature", "mean_pairwise_feature_similarity"];

fn metric_values(m: &MetricsReport) -> [f64; 6] {
    [m.accuracy, m.nll, m.brier, m.ece, m.temperature, m.mean_pairwise_feature_similarity]
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every named config over seeds `seed, seed+1, …` and returns a CSV
/// table: one row per config with mean and population std of each metric on
/// the clean and corrupted test sets. Runs go to `<output_dir>/seed_<s>`.
pub fn compare(configs: &[(String, ExperimentConfig)], seeds: usize) -> Result<String> {
    if seeds == 0 {
        return Err(Error::config("seeds", "must be at least 1"));
    }
    let mut header = vec!["config".to_string(), "seeds".to_string()];
    for set in ["clean", "corrupted"] {
        for m in METRIC_NAMES {
            header.push(format!("{set}_{m}_mean"));
            header.push(format!("{set}_{m}_std"));
        }
    }
    let mut csv = header.join(",") + "\n";
    for (name, cfg) in configs {
        let base = cfg.resolve()?;
        let mut clean = Vec::new();
        let mut corrupted = Vec::new();
        for s in 0..seeds {
            let mut c = cfg.clone();
            c.seed = Some(base.train.seed + s as u64);
            c.output_dir = Some(base.output_dir.join(format!("seed_{s}")));
            let outcome = run(&c)?;
            clean.push(metric_values(&outcome.metrics.clean));
            if let Some(m) = &outcome.metrics.corrupted {
                corrupted.push(metric_values(m));
            }
        }
        let mut row = vec![name.clone(), seeds.to_string()];
        for set in [&clean, &corrupted] {
            for k in 0..METRIC_NAMES.len() {
                if set.is_empty() {
                    row.extend(["".to_string(), "".to_string()]);
                } else {
                    let (m, s) = mean_std(&set.iter().map(|v| v[k]).collect::<Vec<_>>());
                    row.push(m.to_string());
                    row.push(s.to_string());
                }
            }
        }
        csv += &(row.join(",") + "\n");
    }
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    pub dim: usize,
    pub particles: usize,
    pub steps: usize,
    pub target_mean: Vec<f64>,
    pub target_cov_diag: Vec<f64>,
    pub sample_mean: Vec<f64>,
    pub sample_cov: Vec<Vec<f64>>,
    /// ‖mean − μ‖₂
    pub mean_error: f64,
    /// ‖cov − Σ‖_F
    pub cov_error: f64,
}

/// Target used by the sanity mode: `μ_j = (−1)^j`, `Σ = diag(1, 0.5, 1, 0.5, …)`.
pub fn sanity_target(dim: usize) -> Result<GaussianTarget> {
    let mean = (0..dim).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut cov = Matrix::zeros(dim, dim);
    for j in 0..dim {
        cov[(j, j)] = if j % 2 == 0 { 1.0 } else { 0.5 };
    }
    GaussianTarget::new(mean, cov)
}

pub fn sanity_gaussian(dim: usize, particles: usize, steps: usize, lr: f64, seed: u64) -> Result<SanityReport> {
    if dim == 0 {
        return Err(Error::config("dim", "must be at least 1"));
    }
    let target = sanity_target(dim)?;
    let x = gaussian_wgd_sample(&target, particles, steps, lr, seed)?;
    let (mean, cov) = sample_moments(&x);
    let mean_error = mean.iter().zip(target.mean()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let cov_error = cov.sub(target.cov())?.frobenius_norm();
    Ok(SanityReport {
        dim,
        particles,
        steps,
        target_mean: target.mean().to_vec(),
        target_cov_diag: (0..dim).map(|j| target.cov()[(j, j)]).collect(),
        sample_mean: mean,
        sample_cov: (0..dim).map(|i| cov.row(i).to_vec()).collect(),
        mean_error,
        cov_error,
    })
}
