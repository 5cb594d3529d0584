//! Multi-worker feature-space WGD.
//!
//! Each worker is a thread that owns a contiguous shard of particles and a
//! replica of the shared classifier. Per step the workers exchange, in order,
//! their likelihood gradients, their kernel coordinates and their classifier
//! directions through [`WorkerGroup::allgather`]. Everything derived from the
//! gathered data is computed identically on every worker, so the result is
//! bitwise equal to the sequential engine.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::{
    apply_update, batch_order, coordinates_bandwidth, feature_local, feature_particle_update, kernel_coordinates,
    lr_at, mean_direction, repulsion_basis, repulsion_for, Batch, EpochAccumulator, EpochRecord, Ensemble,
    OptimizerState, Space, StepStats, TrainConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::model::{Particle, SharedClassifier};

pub const ROUNDS_PER_STEP: usize = 3;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Exchange rounds of one step, in the order they happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Round {
    Gradients = 0,
    Coordinates = 1,
    ClassifierDirections = 2,
}

fn round_id(step: usize, round: Round) -> u64 {
    (step * ROUNDS_PER_STEP + round as usize) as u64
}

#[derive(Debug)]
struct Exchange {
    generation: u64,
    round: Option<u64>,
    slots: Vec<Option<Vec<f64>>>,
    arrived: usize,
    last: Vec<Vec<f64>>,
    aborted: Option<String>,
}

/// Rendezvous point for `size` workers. `allgather` is the only primitive.
#[derive(Debug)]
pub struct WorkerGroup {
    size: usize,
    timeout: Duration,
    state: Mutex<Exchange>,
    ready: Condvar,
}

impl WorkerGroup {
    pub fn new(size: usize) -> Result<Self> {
        Self::with_timeout(size, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(size: usize, timeout: Duration) -> Result<Self> {
        if size == 0 {
            return Err(Error::config("workers", "need at least one worker"));
        }
        Ok(WorkerGroup {
            size,
            timeout,
            state: Mutex::new(Exchange {
                generation: 0,
                round: None,
                slots: vec![None; size],
                arrived: 0,
                last: Vec::new(),
                aborted: None,
            }),
            ready: Condvar::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Makes every pending and future `allgather` fail; used when one worker
    /// hits an error so the others do not wait out the timeout.
    pub fn abort(&self, reason: &str) {
        let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
        st.aborted.get_or_insert_with(|| reason.to_string());
        self.ready.notify_all();
    }

    /// Contributes `payload` for `round` and returns every worker's payload in
    /// rank order once all have arrived.
    pub fn allgather(&self, rank: usize, round: u64, payload: Vec<f64>) -> Result<Vec<Vec<f64>>> {
        let fail = |message: String| Error::Collective { round: round.to_string(), message };
        if rank >= self.size {
            return Err(fail(format!("rank {rank} outside a group of {}", self.size)));
        }
        let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(reason) = &st.aborted {
            return Err(fail(format!("group aborted: {reason}")));
        }
        match st.round {
            Some(r) if r != round => {
                let msg = format!("rank {rank} sent round {round} while round {r} is open");
                st.aborted = Some(msg.clone());
                self.ready.notify_all();
                return Err(fail(msg));
            }
            _ => st.round = Some(round),
        }
        if st.slots[rank].is_some() {
            return Err(fail(format!("rank {rank} contributed twice")));
        }
        st.slots[rank] = Some(payload);
        st.arrived += 1;

        if st.arrived == self.size {
            st.last = st.slots.iter_mut().map(|s| s.take().unwrap_or_default()).collect();
            st.arrived = 0;
            st.round = None;
            st.generation += 1;
            self.ready.notify_all();
            return Ok(st.last.clone());
        }

        let generation = st.generation;
        let deadline = Instant::now() + self.timeout;
        while st.generation == generation {
            if let Some(reason) = &st.aborted {
                return Err(fail(format!("group aborted: {reason}")));
            }
            let now = Instant::now();
            if now >= deadline {
                let missing = self.size - st.arrived;
                st.aborted = Some(format!("round {round} timed out"));
                self.ready.notify_all();
                return Err(fail(format!("timed out waiting for {missing} worker(s)")));
            }
            st = self
                .ready
                .wait_timeout(st, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        Ok(st.last.clone())
    }
}

/// Bytes contributed to each exchange round during one step, summed over workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepComm {
    pub batch_size: usize,
    /// Length of one particle's kernel coordinates.
    pub coord_dim: usize,
    pub bytes: [usize; ROUNDS_PER_STEP],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommReport {
    pub workers: usize,
    pub rounds_per_step: usize,
    pub steps: Vec<StepComm>,
}

impl CommReport {
    pub fn total_bytes(&self) -> usize {
        self.steps.iter().map(|s| s.bytes.iter().sum::<usize>()).sum()
    }
}

/// Closed-form payload bytes of one step: every particle contributes `B·H`
/// gradient entries, `k` coordinates and `|θ|` classifier entries, 8 bytes each.
pub fn expected_step_bytes(n: usize, batch: usize, feature_dim: usize, coord_dim: usize, theta: usize) -> [usize; 3] {
    [n * batch * feature_dim * 8, n * coord_dim * 8, n * theta * 8]
}

#[derive(Debug, Clone)]
pub struct ParallelOptions {
    pub workers: usize,
    /// Stop after this many steps (all configured epochs when `None`).
    pub max_steps: Option<usize>,
    pub timeout: Duration,
}

impl ParallelOptions {
    pub fn new(workers: usize) -> Self {
        ParallelOptions { workers, max_steps: None, timeout: DEFAULT_TIMEOUT }
    }
}

#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub ensemble: Ensemble,
    pub opt: OptimizerState,
    pub records: Vec<EpochRecord>,
    pub comm: CommReport,
}

struct Shard {
    rank: usize,
    offset: usize,
    particles: Vec<Particle>,
    velocities: Vec<Vec<f64>>,
    classifier: SharedClassifier,
    classifier_velocity: Vec<f64>,
}

struct ShardOutput {
    shard: Shard,
    stats: Vec<(usize, StepStats)>,
    comm: Vec<StepComm>,
}

fn split_chunks(gathered: Vec<Vec<f64>>, per_particle: usize) -> Vec<Vec<f64>> {
    gathered
        .into_iter()
        .flat_map(|w| {
            if per_particle == 0 {
                // repulsion off: nothing was exchanged
                Vec::new()
            } else {
                w.chunks(per_particle).map(<[f64]>::to_vec).collect()
            }
        })
        .collect()
}

fn bytes(gathered: &[Vec<f64>]) -> usize {
    gathered.iter().map(|w| w.len() * 8).sum()
}

#[allow(clippy::too_many_arguments)]
fn shard_step(
    group: &WorkerGroup,
    shard: &mut Shard,
    n: usize,
    step_index: usize,
    batch: &Batch,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<(StepStats, StepComm)> {
    let b = batch.len();
    let locals = shard
        .particles
        .iter()
        .map(|p| feature_local(p, &shard.classifier, batch, cfg))
        .collect::<Result<Vec<_>>>()?;
    let dim = locals[0].g_data.len();

    let payload: Vec<f64> = locals.iter().flat_map(|l| l.g_data.iter().copied()).collect();
    let gathered = group.allgather(shard.rank, round_id(step_index, Round::Gradients), payload)?;
    let mut comm = StepComm { batch_size: b, coord_dim: 0, bytes: [bytes(&gathered), 0, 0] };
    let grads = split_chunks(gathered, dim);
    let basis = repulsion_basis(&grads, cfg)?;

    let payload: Vec<f64> = if cfg.repulsion {
        locals.iter().flat_map(|l| kernel_coordinates(basis.as_ref(), l.features())).collect()
    } else {
        Vec::new()
    };
    let gathered = group.allgather(shard.rank, round_id(step_index, Round::Coordinates), payload)?;
    comm.bytes[1] = bytes(&gathered);
    let total: usize = gathered.iter().map(Vec::len).sum();
    comm.coord_dim = total / n;
    let coords = Matrix::from_rows(&split_chunks(gathered, comm.coord_dim))?;
    let h = coordinates_bandwidth(cfg, &coords);

    let mut stats = StepStats { particles: shard.particles.len(), batch_size: b, ..StepStats::default() };
    let mut v_thetas = Vec::new();
    for (j, local) in locals.into_iter().enumerate() {
        stats.loglik += local.loglik;
        stats.correct += local.correct;
        let rep = repulsion_for(cfg, basis.as_ref(), &coords, h, shard.offset + j, dim);
        stats.repulsion_norm += norm(&rep);
        v_thetas.extend(feature_particle_update(
            cfg,
            &mut shard.particles[j],
            &mut shard.velocities[j],
            &shard.classifier,
            local,
            rep,
            b,
            lr,
        )?);
    }

    let theta = shard.classifier.param_count();
    let gathered = group.allgather(shard.rank, round_id(step_index, Round::ClassifierDirections), v_thetas)?;
    comm.bytes[2] = bytes(&gathered);
    let v_theta = mean_direction(&split_chunks(gathered, theta));
    apply_update(cfg, shard.classifier.params_mut(), &mut shard.classifier_velocity, &v_theta, lr);

    if !stats.loglik.is_finite() {
        return Err(Error::NonFinite { step: step_index, what: "log-likelihood".into() });
    }
    if shard.particles.iter().any(|p| p.params().iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite { step: step_index, what: "parameters".into() });
    }
    Ok((stats, comm))
}

/// `(epoch, lr, batch indices)` for every step the run will take.
fn schedule(cfg: &TrainConfig, samples: usize, max_steps: Option<usize>) -> Vec<(usize, f64, Vec<usize>)> {
    let mut out = Vec::new();
    for epoch in 0..cfg.epochs {
        let lr = lr_at(cfg, epoch);
        for idx in batch_order(cfg.seed, epoch, samples, cfg.batch_size) {
            if max_steps.is_some_and(|m| out.len() >= m) {
                return out;
            }
            out.push((epoch, lr, idx));
        }
    }
    out
}

fn run_shard(
    group: &WorkerGroup,
    mut shard: Shard,
    n: usize,
    plan: &[(usize, f64, Vec<usize>)],
    x: &Matrix,
    y: &[usize],
    cfg: &TrainConfig,
) -> Result<ShardOutput> {
    let mut stats = Vec::with_capacity(plan.len());
    let mut comm = Vec::with_capacity(plan.len());
    for (s, (epoch, lr, idx)) in plan.iter().enumerate() {
        let batch = Batch::gather(x, y, idx);
        match shard_step(group, &mut shard, n, s, &batch, cfg, *lr) {
            Ok((st, c)) => {
                stats.push((*epoch, st));
                comm.push(c);
            }
            Err(e) => {
                group.abort(&e.to_string());
                return Err(e);
            }
        }
    }
    Ok(ShardOutput { shard, stats, comm })
}

/// Feature-space WGD on `opts.workers` threads, each holding `n / K` particles.
pub fn run_parallel(cfg: &TrainConfig, x: &Matrix, y: &[usize], classes: usize, opts: &ParallelOptions) -> Result<ParallelRun> {
    cfg.validate()?;
    if cfg.space != Space::Feature {
        return Err(Error::config("space", "parallel execution is implemented for feature space only"));
    }
    let k = opts.workers;
    if k == 0 || cfg.n % k != 0 {
        return Err(Error::config("workers", format!("{} particles cannot be split over {k} workers", cfg.n)));
    }
    if x.rows() != y.len() {
        return Err(Error::dims("run_parallel", format!("{} rows, {} labels", x.rows(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset("training split"));
    }

    let ensemble = Ensemble::init(cfg, x.cols(), classes)?;
    let opt = OptimizerState::zeros(&ensemble);
    let per = cfg.n / k;
    let mut particles = ensemble.particles.into_iter();
    let mut velocities = opt.particles.into_iter();
    let shards: Vec<Shard> = (0..k)
        .map(|rank| Shard {
            rank,
            offset: rank * per,
            particles: particles.by_ref().take(per).collect(),
            velocities: velocities.by_ref().take(per).collect(),
            classifier: ensemble.classifiers[0].clone(),
            classifier_velocity: opt.classifiers[0].clone(),
        })
        .collect();

    let plan = schedule(cfg, y.len(), opts.max_steps);
    let group = WorkerGroup::with_timeout(k, opts.timeout)?;
    let outputs: Vec<Result<ShardOutput>> = thread::scope(|s| {
        let handles: Vec<_> = shards
            .into_iter()
            .map(|shard| {
                let (group, plan) = (&group, &plan);
                s.spawn(move || run_shard(group, shard, cfg.n, plan, x, y, cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Collective { round: "-".into(), message: "worker panicked".into() })))
            .collect()
    });

    // Prefer the root-cause error over the aborts it triggered elsewhere.
    let mut outputs_ok = Vec::with_capacity(k);
    let mut first_err = None;
    for o in outputs {
        match o {
            Ok(v) => outputs_ok.push(v),
            Err(e) => {
                let is_abort = matches!(&e, Error::Collective { message, .. } if message.starts_with("group aborted"));
                if first_err.as_ref().is_none_or(|(abort, _)| *abort && !is_abort) {
                    first_err = Some((is_abort, e));
                }
            }
        }
    }
    if let Some((_, e)) = first_err {
        return Err(e);
    }

    let replica = &outputs_ok[0].shard;
    if outputs_ok.iter().any(|o| o.shard.classifier != replica.classifier) {
        return Err(Error::Collective { round: "final".into(), message: "classifier replicas diverged".into() });
    }
    let classifier = replica.classifier.clone();
    let classifier_velocity = replica.classifier_velocity.clone();
    let comm_steps = outputs_ok[0].comm.clone();

    let mut records = Vec::new();
    let steps = plan.len();
    let mut s = 0;
    while s < steps {
        let epoch = plan[s].0;
        let mut acc = EpochAccumulator::default();
        while s < steps && plan[s].0 == epoch {
            let mut total = StepStats::default();
            for o in &outputs_ok {
                let st = &o.stats[s].1;
                total.loglik += st.loglik;
                total.correct += st.correct;
                total.repulsion_norm += st.repulsion_norm;
                total.particles += st.particles;
                total.batch_size = st.batch_size;
            }
            acc.add(&total);
            s += 1;
        }
        records.push(acc.finish(epoch, plan[s - 1].1));
    }

    let mut particles = Vec::with_capacity(cfg.n);
    let mut velocities = Vec::with_capacity(cfg.n);
    for o in outputs_ok {
        particles.extend(o.shard.particles);
        velocities.extend(o.shard.velocities);
    }
    Ok(ParallelRun {
        ensemble: Ensemble { particles, classifiers: vec![classifier] },
        opt: OptimizerState { particles: velocities, classifiers: vec![classifier_velocity] },
        records,
        comm: CommReport { workers: k, rounds_per_step: ROUNDS_PER_STEP, steps: comm_steps },
    })
}
