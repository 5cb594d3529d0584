//! Step traces for the reduction checks.

use fwgd::engine::{batch_order, lr_at, nesterov_update, Batch, Ensemble, Space, TrainConfig, Trainer};
use fwgd::linalg::Matrix;
use fwgd::model::{backprop_trace, forward_trace, loglik_and_grads};
use fwgd::priors::PriorSpec;

use super::{max_abs_diff, small_config, toy_problem};

pub const STEPS: usize = 200;

pub fn params(ens: &Ensemble) -> Vec<f64> {
    let mut v: Vec<f64> = ens.particles.iter().flat_map(|p| p.params().to_vec()).collect();
    v.extend(ens.classifiers.iter().flat_map(|c| c.params().to_vec()));
    v
}

/// Calls `visit` with the ensemble after every step.
pub fn drive(cfg: TrainConfig, x: &Matrix, y: &[usize], mut visit: impl FnMut(usize, &Ensemble)) {
    let mut t = Trainer::new(cfg.clone(), x.cols(), 3).unwrap();
    let mut step = 0;
    for epoch in 0.. {
        for idx in batch_order(cfg.seed, epoch, y.len(), cfg.batch_size) {
            if step == STEPS {
                return;
            }
            t.step(&Batch::gather(x, y, &idx), lr_at(&cfg, epoch)).unwrap();
            visit(step, &t.ensemble);
            step += 1;
        }
    }
}

pub fn trace(cfg: TrainConfig, x: &Matrix, y: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(STEPS);
    drive(cfg, x, y, |_, ens| out.push(params(ens)));
    out
}

pub fn worst_deviation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| max_abs_diff(p, q)).fold(0.0, f64::max)
}

/// Plain single-network training written out directly: mean log-likelihood
/// ascent with weight decay and Nesterov momentum on extractor and head.
pub fn single_model_trace(cfg: &TrainConfig, x: &Matrix, y: &[usize]) -> Vec<Vec<f64>> {
    let ens = Ensemble::init(cfg, x.cols(), 3).unwrap();
    let mut p = ens.particles[0].clone();
    let mut c = ens.classifiers[0].clone();
    let mut vp = vec![0.0; p.params().len()];
    let mut vc = vec![0.0; c.param_count()];
    let mut out = Vec::new();
    for epoch in 0.. {
        let lr = lr_at(cfg, epoch);
        for idx in batch_order(cfg.seed, epoch, y.len(), cfg.batch_size) {
            if out.len() == STEPS {
                return out;
            }
            let b = Batch::gather(x, y, &idx);
            let inv_b = 1.0 / b.len() as f64;
            let trace = forward_trace(&p, &b.x).unwrap();
            let g = loglik_and_grads(&c, trace.features(), &b.y).unwrap();
            let gw = backprop_trace(&p, &trace, &g.g_feat).unwrap();
            let dw: Vec<f64> = gw.iter().zip(p.params()).map(|(g, w)| g * inv_b - cfg.weight_decay * w).collect();
            let dc: Vec<f64> = g.g_theta.iter().zip(c.params()).map(|(g, w)| g * inv_b - cfg.weight_decay * w).collect();
            nesterov_update(p.params_mut(), &mut vp, &dw, lr, cfg.momentum);
            nesterov_update(c.params_mut(), &mut vc, &dc, lr, cfg.momentum);
            let mut v = p.params().to_vec();
            v.extend_from_slice(c.params());
            out.push(v);
        }
    }
    unreachable!()
}

/// One particle, uniform prior: feature-WGD against the hand-written loop.
pub fn single_particle_deviation(seed: u64) -> f64 {
    let (x, y) = toy_problem(120, 5, 3, seed);
    let cfg = TrainConfig { prior: PriorSpec::uniform(), ..small_config(Space::Feature, 1) };
    worst_deviation(&trace(cfg.clone(), &x, &y), &single_model_trace(&cfg, &x, &y))
}

/// Feature-WGD with prior and repulsion off against shared-head Deep Ensembles.
pub fn deep_ensemble_deviation(seed: u64) -> f64 {
    let (x, y) = toy_problem(120, 5, 3, seed);
    let fw = TrainConfig { prior: PriorSpec::uniform(), repulsion: false, ..small_config(Space::Feature, 4) };
    let de = TrainConfig { share_classifier: true, ..small_config(Space::None, 4) };
    worst_deviation(&trace(fw, &x, &y), &trace(de, &x, &y))
}
