#![allow(dead_code)]

pub mod chain;
pub mod oracle;
pub mod sharded;

use fwgd::engine::{Space, TrainConfig};
use fwgd::linalg::{norm, Matrix};
use fwgd::model::{
    backprop_trace, forward_trace, logit_loglik_and_grad, loglik_and_grads, FeatureBatch, Particle, SharedClassifier,
};
use fwgd::priors::{prior_logp, prior_logp_grad, rbf_kernel, rbf_kernel_grad, PriorFamily, PriorSpec};
use fwgd::repulsion::kde_repulsion;
use fwgd::rng::RngState;

pub const FD_EPS: f64 = 1e-6;

/// Central differences of `f` at `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + eps;
            let up = f(&y);
            y[k] = x[k] - eps;
            let down = f(&y);
            y[k] = x[k];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both are tiny.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-8 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut RngState, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| scale * rng.normal()).collect()).unwrap()
}

pub fn random_labels(n: usize, classes: usize, rng: &mut RngState) -> Vec<usize> {
    (0..n).map(|_| rng.below(classes)).collect()
}

pub fn features(values: Matrix) -> FeatureBatch {
    FeatureBatch { particle: 0, values }
}

/// One random small problem for the gradient checks.
pub struct Instance {
    pub particle: Particle,
    pub classifier: SharedClassifier,
    pub x: Matrix,
    pub y: Vec<usize>,
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = RngState::new(seed);
    let d = 2 + rng.below(4);
    let hidden = 2 + rng.below(5);
    let h = 2 + rng.below(5);
    let c = 2 + rng.below(3);
    let b = 1 + rng.below(5);
    let mut particle = Particle::he_uniform(0, &[d, hidden, h], &mut rng).unwrap();
    // nonzero biases keep pre-activations off the ReLU kink at exactly 0
    for v in particle.params_mut() {
        *v += 0.2 * rng.normal();
    }
    let mut classifier = SharedClassifier::init(h, c, &mut rng);
    for v in classifier.params_mut() {
        *v += 0.3 * rng.normal();
    }
    Instance {
        particle,
        classifier,
        x: random_matrix(b, d, &mut rng, 1.0),
        y: random_labels(b, c, &mut rng),
    }
}

/// Largest relative error per analytic gradient over `count` random instances,
/// in the order of [`GRADIENT_NAMES`].
pub const GRADIENT_NAMES: [&str; 9] = [
    "loglik wrt features",
    "loglik wrt classifier",
    "loglik wrt logits",
    "feature pullback wrt weights",
    "loglik wrt weights",
    "half_normal / normal prior",
    "half_cauchy / cauchy prior",
    "rbf kernel wrt first argument",
    "kde repulsion as log-density gradient",
];

pub fn gradient_errors(count: usize) -> [f64; 9] {
    let mut worst = [0.0f64; 9];
    for s in 0..count as u64 {
        let inst = instance(1000 + s);
        let mut rng = RngState::new(5000 + s);
        let trace = forward_trace(&inst.particle, &inst.x).unwrap();
        let h = trace.features().values.clone();
        let (b, hd) = h.shape();
        let c = inst.classifier.classes();

        // features
        let g = loglik_and_grads(&inst.classifier, trace.features(), &inst.y).unwrap();
        let f = |v: &[f64]| {
            let hb = features(Matrix::from_vec(b, hd, v.to_vec()).unwrap());
            loglik_and_grads(&inst.classifier, &hb, &inst.y).unwrap().loglik
        };
        worst[0] = worst[0].max(rel_err(g.g_feat.as_slice(), &fd_grad(f, h.as_slice(), FD_EPS)));

        // classifier parameters
        let f = |v: &[f64]| {
            let cl = SharedClassifier::from_params(hd, c, v.to_vec()).unwrap();
            loglik_and_grads(&cl, trace.features(), &inst.y).unwrap().loglik
        };
        worst[1] = worst[1].max(rel_err(&g.g_theta, &fd_grad(f, inst.classifier.params(), FD_EPS)));

        // logits
        let logits = random_matrix(b, c, &mut rng, 2.0);
        let (_, gl, _) = logit_loglik_and_grad(&logits, &inst.y).unwrap();
        let f = |v: &[f64]| logit_loglik_and_grad(&Matrix::from_vec(b, c, v.to_vec()).unwrap(), &inst.y).unwrap().0;
        worst[2] = worst[2].max(rel_err(gl.as_slice(), &fd_grad(f, logits.as_slice(), FD_EPS)));

        // weights through an arbitrary feature cotangent
        let v_feat = random_matrix(b, hd, &mut rng, 1.0);
        let analytic = backprop_trace(&inst.particle, &trace, &v_feat).unwrap();
        let sizes = inst.particle.sizes().to_vec();
        let f = |w: &[f64]| {
            let p = Particle::from_params(0, &sizes, w.to_vec()).unwrap();
            let hv = forward_trace(&p, &inst.x).unwrap();
            hv.features().values.as_slice().iter().zip(v_feat.as_slice()).map(|(a, b)| a * b).sum()
        };
        worst[3] = worst[3].max(rel_err(&analytic, &fd_grad(f, inst.particle.params(), FD_EPS)));

        // full chain to the weights
        let analytic = backprop_trace(&inst.particle, &trace, &g.g_feat).unwrap();
        let f = |w: &[f64]| {
            let p = Particle::from_params(0, &sizes, w.to_vec()).unwrap();
            let hv = forward_trace(&p, &inst.x).unwrap();
            loglik_and_grads(&inst.classifier, hv.features(), &inst.y).unwrap().loglik
        };
        worst[4] = worst[4].max(rel_err(&analytic, &fd_grad(f, inst.particle.params(), FD_EPS)));

        // priors, on positive points for the half families
        let pts: Vec<f64> = (0..6).map(|_| rng.uniform(0.05, 4.0)).collect();
        let signed: Vec<f64> = (0..6).map(|_| 3.0 * rng.normal()).collect();
        let scale = rng.uniform(0.2, 3.0);
        for (slot, families) in [
            (5, [PriorFamily::HalfNormal, PriorFamily::Normal]),
            (6, [PriorFamily::HalfCauchy, PriorFamily::Cauchy]),
        ] {
            for (fam, at) in families.into_iter().zip([&pts, &signed]) {
                let spec = PriorSpec::new(fam, scale).unwrap();
                let analytic = prior_logp_grad(&spec, at).unwrap();
                let f = |v: &[f64]| v.iter().map(|&x| prior_logp(&spec, x)).sum();
                worst[slot] = worst[slot].max(rel_err(&analytic, &fd_grad(f, at, FD_EPS)));
            }
        }

        // kernel
        let dim = 1 + rng.below(5);
        let a: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let bb: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let bw = rng.uniform(0.5, 4.0);
        let f = |v: &[f64]| rbf_kernel(v, &bb, bw);
        worst[7] = worst[7].max(rel_err(&rbf_kernel_grad(&a, &bb, bw), &fd_grad(f, &a, FD_EPS)));

        // kde repulsion is ∇ log Σ_j k(·, x_j) with the other points held fixed
        let n = 2 + rng.below(6);
        let pts = random_matrix(n, dim, &mut rng, 1.0);
        let i = rng.below(n);
        let f = |v: &[f64]| (0..n).map(|j| rbf_kernel(v, pts.row(j), bw)).sum::<f64>().ln();
        worst[8] = worst[8].max(rel_err(&kde_repulsion(&pts, i, bw), &fd_grad(f, pts.row(i), FD_EPS)));
    }
    worst
}

/// A small multi-class problem for step-level comparisons.
pub fn toy_problem(samples: usize, dim: usize, classes: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = RngState::new(seed);
    let centers = random_matrix(classes, dim, &mut rng, 1.5);
    let y = random_labels(samples, classes, &mut rng);
    let mut x = random_matrix(samples, dim, &mut rng, 0.7);
    for (r, &label) in y.iter().enumerate() {
        for (v, c) in x.row_mut(r).iter_mut().zip(centers.row(label)) {
            *v += c;
        }
    }
    (x, y)
}

pub fn small_config(space: Space, n: usize) -> TrainConfig {
    TrainConfig {
        n,
        hidden: vec![8],
        feature_dim: 6,
        batch_size: 16,
        epochs: 100,
        ..TrainConfig::defaults_for(space)
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
