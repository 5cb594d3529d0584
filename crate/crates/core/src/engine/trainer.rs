use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::lr_at;
use super::steps::{step, Batch, Ensemble, OptimizerState, StepStats};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{streams, RngState};

/// Mini-batch index lists for one epoch: a seeded shuffle cut into chunks of
/// `batch_size` (the last one may be shorter).
pub fn batch_order(seed: u64, epoch: usize, samples: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut rng = RngState::derive(seed, streams::BATCHES + epoch as u64);
    let perm = rng.permutation(samples);
    perm.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Per-epoch training summary, one row of `train_log.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Log-likelihood per sample, averaged over members.
    pub mean_loglik: f64,
    /// Mean repulsion norm per particle and step.
    pub repulsion_norm: f64,
    /// Training accuracy over the epoch's batches, averaged over members.
    pub accuracy: f64,
    pub steps: usize,
}

#[derive(Debug, Default)]
pub(crate) struct EpochAccumulator {
    loglik: f64,
    correct: usize,
    repulsion: f64,
    rows: usize,
    particle_steps: usize,
    steps: usize,
}

impl EpochAccumulator {
    pub(crate) fn add(&mut self, s: &StepStats) {
        self.loglik += s.loglik;
        self.correct += s.correct;
        self.repulsion += s.repulsion_norm;
        self.rows += s.particles * s.batch_size;
        self.particle_steps += s.particles;
        self.steps += 1;
    }

    pub(crate) fn finish(self, epoch: usize, lr: f64) -> EpochRecord {
        let rows = self.rows.max(1) as f64;
        EpochRecord {
            epoch,
            lr,
            mean_loglik: self.loglik / rows,
            repulsion_norm: self.repulsion / self.particle_steps.max(1) as f64,
            accuracy: self.correct as f64 / rows,
            steps: self.steps,
        }
    }
}

/// Owns an ensemble and its optimizer state and runs epochs over a training set.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub ensemble: Ensemble,
    pub opt: OptimizerState,
    steps_done: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, input_dim: usize, classes: usize) -> Result<Self> {
        let ensemble = Ensemble::init(&cfg, input_dim, classes)?;
        let opt = OptimizerState::zeros(&ensemble);
        Ok(Trainer {
            cfg,
            ensemble,
            opt,
            steps_done: 0,
        })
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// One step on `batch`; aborts with the step index if anything turns non-finite.
    pub fn step(&mut self, batch: &Batch, lr: f64) -> Result<StepStats> {
        let stats = step(&mut self.ensemble, &mut self.opt, batch, &self.cfg, lr)?;
        let index = self.steps_done;
        self.steps_done += 1;
        if !stats.loglik.is_finite() {
            return Err(Error::NonFinite { step: index, what: "log-likelihood".into() });
        }
        if !self.ensemble.is_finite() {
            return Err(Error::NonFinite { step: index, what: "parameters".into() });
        }
        Ok(stats)
    }

    pub fn train_epoch(&mut self, x: &Matrix, y: &[usize], epoch: usize) -> Result<EpochRecord> {
        if y.is_empty() {
            return Err(Error::EmptyDataset("training split"));
        }
        let lr = lr_at(&self.cfg, epoch);
        let mut acc = EpochAccumulator::default();
        for idx in batch_order(self.cfg.seed, epoch, y.len(), self.cfg.batch_size) {
            let batch = Batch::gather(x, y, &idx);
            acc.add(&self.step(&batch, lr)?);
        }
        Ok(acc.finish(epoch, lr))
    }

    /// The first `steps` steps of the epoch schedule, for step-level comparisons.
    pub fn fit_steps(&mut self, x: &Matrix, y: &[usize], steps: usize) -> Result<Vec<StepStats>> {
        let mut out = Vec::with_capacity(steps);
        for epoch in 0..self.cfg.epochs {
            let lr = lr_at(&self.cfg, epoch);
            for idx in batch_order(self.cfg.seed, epoch, y.len(), self.cfg.batch_size) {
                if out.len() == steps {
                    return Ok(out);
                }
                out.push(self.step(&Batch::gather(x, y, &idx), lr)?);
            }
        }
        Ok(out)
    }

    /// All configured epochs.
    pub fn fit(&mut self, x: &Matrix, y: &[usize]) -> Result<Vec<EpochRecord>> {
        (0..self.cfg.epochs).map(|e| self.train_epoch(x, y, e)).collect()
    }
}
