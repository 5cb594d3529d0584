//! Sharded runs against the sequential engine.

use fwgd::engine::{Ensemble, OptimizerState, TrainConfig, Trainer};
use fwgd::parallel::{expected_step_bytes, run_parallel, ParallelOptions};

use super::{max_abs_diff, toy_problem};

pub const STEPS: usize = 100;

fn flat(ens: &Ensemble, opt: &OptimizerState) -> Vec<f64> {
    let mut v: Vec<f64> = ens.particles.iter().flat_map(|p| p.params().to_vec()).collect();
    v.extend(ens.classifiers.iter().flat_map(|c| c.params().to_vec()));
    v.extend(opt.particles.iter().flatten());
    v.extend(opt.classifiers.iter().flatten());
    v
}

pub struct ShardCheck {
    /// Largest elementwise gap in parameters and optimizer state.
    pub deviation: f64,
    /// Every step's byte counts equal the closed form.
    pub bytes_match: bool,
}

pub fn shard_check(cfg: &TrainConfig, workers: usize) -> ShardCheck {
    let (x, y) = toy_problem(150, 5, 3, 7);
    let mut seq = Trainer::new(cfg.clone(), x.cols(), 3).unwrap();
    seq.fit_steps(&x, &y, STEPS).unwrap();

    let opts = ParallelOptions { max_steps: Some(STEPS), ..ParallelOptions::new(workers) };
    let par = run_parallel(cfg, &x, &y, 3, &opts).unwrap();
    let deviation = max_abs_diff(&flat(&seq.ensemble, &seq.opt), &flat(&par.ensemble, &par.opt));

    let theta = par.ensemble.classifiers[0].param_count();
    let bytes_match = par.comm.steps.len() == STEPS
        && par.comm.rounds_per_step == 3
        && par.comm.steps.iter().all(|s| {
            let k = if !cfg.repulsion {
                0
            } else if cfg.projection {
                cfg.r.min(cfg.n)
            } else {
                s.batch_size * cfg.feature_dim
            };
            s.coord_dim == k && s.bytes == expected_step_bytes(cfg.n, s.batch_size, cfg.feature_dim, k, theta)
        });
    ShardCheck { deviation, bytes_match }
}
