//! One optimisation step per inference space.
//!
//! Every step has the same three phases: independent per-particle
//! forward/backward passes, an exchange of what the interaction terms need
//! (gradients, particle coordinates), and independent per-particle updates.
//! The feature-space phases are exposed separately so the multi-worker
//! schedule in [`crate::parallel`] runs exactly the same arithmetic.

use serde::{Deserialize, Serialize};

use super::config::{Space, TrainConfig};
use super::optim::{apply_update, batch_direction};
use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::model::{
    self, backprop_trace, classifier_vjp, forward_classifier, forward_trace, logit_loglik_and_grad,
    loglik_and_grads, FeatureTrace, Particle, SharedClassifier,
};
use crate::priors::prior_logp_grad;
use crate::repulsion::{assemble_direction, build_basis, kde_repulsion_all, repulsion_from_projected, ProjectionBasis};
use crate::rng::{streams, RngState};

/// A mini-batch of inputs and labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Matrix,
    pub y: Vec<usize>,
}

impl Batch {
    pub fn new(x: Matrix, y: Vec<usize>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::dims("Batch::new", format!("{} rows, {} labels", x.rows(), y.len())));
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset("batch"));
        }
        Ok(Batch { x, y })
    }

    pub fn gather(x: &Matrix, y: &[usize], idx: &[usize]) -> Self {
        Batch {
            x: x.select_rows(idx),
            y: idx.iter().map(|&i| y[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Feature extractors plus one shared or `n` per-member classifier heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub classifiers: Vec<SharedClassifier>,
}

impl Ensemble {
    /// Seeded initialisation; particle `i` draws from its own stream so members
    /// differ only through their initial weights.
    pub fn init(cfg: &TrainConfig, input_dim: usize, classes: usize) -> Result<Self> {
        cfg.validate()?;
        let sizes = cfg.layer_sizes(input_dim);
        let particles = (0..cfg.n)
            .map(|i| {
                let mut rng = RngState::derive(cfg.seed, streams::PARTICLE + i as u64);
                Particle::he_uniform(i, &sizes, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let classifiers = if cfg.shares_classifier() {
            let mut rng = RngState::derive(cfg.seed, streams::CLASSIFIER);
            vec![SharedClassifier::init(cfg.feature_dim, classes, &mut rng)]
        } else {
            (0..cfg.n)
                .map(|i| {
                    let mut rng = RngState::derive(cfg.seed, streams::MEMBER_CLASSIFIER + i as u64);
                    SharedClassifier::init(cfg.feature_dim, classes, &mut rng)
                })
                .collect()
        };
        Ok(Ensemble { particles, classifiers })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn classifier_for(&self, i: usize) -> &SharedClassifier {
        if self.classifiers.len() == 1 {
            &self.classifiers[0]
        } else {
            &self.classifiers[i]
        }
    }

    pub fn classes(&self) -> usize {
        self.classifiers[0].classes()
    }

    pub fn member_logits(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        (0..self.len())
            .map(|i| model::member_logits(&self.particles[i], self.classifier_for(i), x))
            .collect()
    }

    pub fn predict(&self, x: &Matrix, temperature: f64) -> Result<Matrix> {
        model::average_probabilities(&self.member_logits(x)?, temperature)
    }

    pub fn is_finite(&self) -> bool {
        self.particles.iter().all(|p| p.params().iter().all(|v| v.is_finite()))
            && self.classifiers.iter().all(|c| c.params().iter().all(|v| v.is_finite()))
    }
}

/// Velocity buffers mirroring every parameter block, zero-initialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub particles: Vec<Vec<f64>>,
    pub classifiers: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn zeros(ens: &Ensemble) -> Self {
        OptimizerState {
            particles: ens.particles.iter().map(|p| vec![0.0; p.params().len()]).collect(),
            classifiers: ens.classifiers.iter().map(|c| vec![0.0; c.param_count()]).collect(),
        }
    }
}

/// Totals over all particles for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    /// Summed over particles and batch rows.
    pub loglik: f64,
    /// Correct predictions summed over particles.
    pub correct: usize,
    /// `Σ_i ‖repulsion_i‖`
    pub repulsion_norm: f64,
    pub particles: usize,
    pub batch_size: usize,
}

fn scaled_prior(cfg: &TrainConfig, v: &[f64]) -> Result<Vec<f64>> {
    let mut g = prior_logp_grad(&cfg.prior, v)?;
    if cfg.prior_scale != 1.0 {
        g.iter_mut().for_each(|x| *x *= cfg.prior_scale);
    }
    Ok(g)
}

/// Mean of per-particle classifier directions, summed in particle order.
pub fn mean_direction(directions: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; directions[0].len()];
    for d in directions {
        for (a, v) in acc.iter_mut().zip(d) {
            *a += v;
        }
    }
    let n = directions.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Phase-one results for one particle in feature space.
#[derive(Debug, Clone)]
pub struct FeatureLocal {
    pub trace: FeatureTrace,
    /// `∇_h log p(batch | h)`, flattened `B·H`.
    pub g_data: Vec<f64>,
    pub g_prior: Vec<f64>,
    pub g_theta: Vec<f64>,
    pub loglik: f64,
    pub correct: usize,
}

impl FeatureLocal {
    pub fn features(&self) -> &[f64] {
        self.trace.features().flat()
    }
}

pub fn feature_local(p: &Particle, c: &SharedClassifier, batch: &Batch, cfg: &TrainConfig) -> Result<FeatureLocal> {
    let trace = forward_trace(p, &batch.x)?;
    let lg = loglik_and_grads(c, trace.features(), &batch.y)?;
    let g_prior = scaled_prior(cfg, trace.features().flat())?;
    Ok(FeatureLocal {
        g_data: lg.g_feat.into_vec(),
        g_prior,
        g_theta: lg.g_theta,
        loglik: lg.loglik,
        correct: lg.correct,
        trace,
    })
}

/// Basis of the repulsion subspace, or `None` when the repulsion is off or
/// evaluated in the full space.
pub fn repulsion_basis<V: AsRef<[f64]>>(grads: &[V], cfg: &TrainConfig) -> Result<Option<ProjectionBasis>> {
    if cfg.repulsion && cfg.projection {
        build_basis(grads, cfg.r).map(Some)
    } else {
        Ok(None)
    }
}

/// Coordinates in which the kernel is evaluated: `Ψᵀ x` or `x` itself.
pub fn kernel_coordinates(basis: Option<&ProjectionBasis>, x: &[f64]) -> Vec<f64> {
    match basis {
        Some(b) => b.project(x),
        None => x.to_vec(),
    }
}

/// Repulsion for particle `i` given every particle's kernel coordinates, mapped
/// back to the full space. All zeros when the repulsion is disabled.
pub fn repulsion_for(
    cfg: &TrainConfig,
    basis: Option<&ProjectionBasis>,
    coords: &Matrix,
    bandwidth: f64,
    i: usize,
    dim: usize,
) -> Vec<f64> {
    if !cfg.repulsion {
        return vec![0.0; dim];
    }
    match basis {
        Some(b) => repulsion_from_projected(b, coords, i, bandwidth),
        None => crate::repulsion::kde_repulsion(coords, i, bandwidth),
    }
}

/// Bandwidth for the gathered kernel coordinates.
pub fn coordinates_bandwidth(cfg: &TrainConfig, coords: &Matrix) -> f64 {
    if coords.cols() == 0 {
        1.0
    } else {
        cfg.kernel.bandwidth_for(coords)
    }
}

/// Phase three for one feature-space particle: assemble `v_h`, pull it back to
/// the weights, update them and return this particle's classifier direction.
#[allow(clippy::too_many_arguments)]
pub fn feature_particle_update(
    cfg: &TrainConfig,
    particle: &mut Particle,
    velocity: &mut [f64],
    classifier: &SharedClassifier,
    local: FeatureLocal,
    repulsion: Vec<f64>,
    batch_size: usize,
    lr: f64,
) -> Result<Vec<f64>> {
    let inv_b = 1.0 / batch_size as f64;
    let dir = assemble_direction(local.g_data, local.g_prior, repulsion)?;
    let v_h = Matrix::from_vec(batch_size, particle.feature_dim(), dir.total())?;
    let grad_w = backprop_trace(particle, &local.trace, &v_h)?;
    let v_w = batch_direction(&grad_w, inv_b, cfg.weight_decay, particle.params());
    apply_update(cfg, particle.params_mut(), velocity, &v_w, lr);
    Ok(batch_direction(&local.g_theta, inv_b, cfg.weight_decay, classifier.params()))
}

/// Feature-space WGD with a shared classifier.
pub fn feature_wgd_step(
    ens: &mut Ensemble,
    opt: &mut OptimizerState,
    batch: &Batch,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<StepStats> {
    if ens.classifiers.len() != 1 {
        return Err(Error::config("space", "feature-space inference needs a single shared classifier"));
    }
    let b = batch.len();
    let locals = ens
        .particles
        .iter()
        .map(|p| feature_local(p, &ens.classifiers[0], batch, cfg))
        .collect::<Result<Vec<_>>>()?;

    let grads: Vec<&[f64]> = locals.iter().map(|l| l.g_data.as_slice()).collect();
    let basis = repulsion_basis(&grads, cfg)?;
    let coords_rows: Vec<Vec<f64>> = if cfg.repulsion {
        locals.iter().map(|l| kernel_coordinates(basis.as_ref(), l.features())).collect()
    } else {
        Vec::new()
    };
    let coords = Matrix::from_rows(&coords_rows)?;
    let h = coordinates_bandwidth(cfg, &coords);

    let mut stats = StepStats { particles: ens.len(), batch_size: b, ..StepStats::default() };
    let mut v_thetas = Vec::with_capacity(ens.len());
    for (i, local) in locals.into_iter().enumerate() {
        stats.loglik += local.loglik;
        stats.correct += local.correct;
        let rep = repulsion_for(cfg, basis.as_ref(), &coords, h, i, local.g_data.len());
        stats.repulsion_norm += norm(&rep);
        v_thetas.push(feature_particle_update(
            cfg,
            &mut ens.particles[i],
            &mut opt.particles[i],
            &ens.classifiers[0],
            local,
            rep,
            b,
            lr,
        )?);
    }
    let v_theta = mean_direction(&v_thetas);
    apply_update(cfg, ens.classifiers[0].params_mut(), &mut opt.classifiers[0], &v_theta, lr);
    Ok(stats)
}

/// Independent members; with a shared head its direction is the member average.
pub fn deep_ensembles_step(
    ens: &mut Ensemble,
    opt: &mut OptimizerState,
    batch: &Batch,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<StepStats> {
    let b = batch.len();
    let inv_b = 1.0 / b as f64;
    let shared = ens.classifiers.len() == 1;
    let mut stats = StepStats { particles: ens.len(), batch_size: b, ..StepStats::default() };
    let mut v_thetas = Vec::with_capacity(ens.len());
    for i in 0..ens.len() {
        let ci = if shared { 0 } else { i };
        let trace = forward_trace(&ens.particles[i], &batch.x)?;
        let lg = loglik_and_grads(&ens.classifiers[ci], trace.features(), &batch.y)?;
        stats.loglik += lg.loglik;
        stats.correct += lg.correct;
        let grad_w = backprop_trace(&ens.particles[i], &trace, &lg.g_feat)?;
        let v_w = batch_direction(&grad_w, inv_b, cfg.weight_decay, ens.particles[i].params());
        apply_update(cfg, ens.particles[i].params_mut(), &mut opt.particles[i], &v_w, lr);
        let v_theta = batch_direction(&lg.g_theta, inv_b, cfg.weight_decay, ens.classifiers[ci].params());
        if shared {
            v_thetas.push(v_theta);
        } else {
            apply_update(cfg, ens.classifiers[i].params_mut(), &mut opt.classifiers[i], &v_theta, lr);
        }
    }
    if shared {
        let v_theta = mean_direction(&v_thetas);
        apply_update(cfg, ens.classifiers[0].params_mut(), &mut opt.classifiers[0], &v_theta, lr);
    }
    Ok(stats)
}

fn require_per_member(ens: &Ensemble, space: Space) -> Result<()> {
    if ens.classifiers.len() != ens.len() {
        return Err(Error::config(
            "space",
            format!("{} inference needs one classifier per member", space.name()),
        ));
    }
    Ok(())
}

/// Repulsion for every particle over the given inference variables, with
/// the basis (if any) built from `grads`. Returns zeros when disabled.
fn repulsions<V: AsRef<[f64]>>(cfg: &TrainConfig, vars: &[Vec<f64>], grads: &[V]) -> Result<Vec<Vec<f64>>> {
    let dim = vars[0].len();
    if !cfg.repulsion {
        return Ok(vec![vec![0.0; dim]; vars.len()]);
    }
    match repulsion_basis(grads, cfg)? {
        Some(basis) => {
            let coords = basis.project_all(vars);
            let h = coordinates_bandwidth(cfg, &coords);
            Ok((0..vars.len()).map(|i| repulsion_from_projected(&basis, &coords, i, h)).collect())
        }
        None => {
            let points = Matrix::from_rows(vars)?;
            Ok(kde_repulsion_all(&points, &cfg.kernel).0)
        }
    }
}

/// WGD on the flattened weights `[extractor ‖ head]` of each member.
pub fn weight_wgd_step(
    ens: &mut Ensemble,
    opt: &mut OptimizerState,
    batch: &Batch,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<StepStats> {
    require_per_member(ens, Space::Weight)?;
    let b = batch.len();
    let inv_b = 1.0 / b as f64;
    let mut stats = StepStats { particles: ens.len(), batch_size: b, ..StepStats::default() };

    let mut weights = Vec::with_capacity(ens.len());
    let mut driving = Vec::with_capacity(ens.len());
    for i in 0..ens.len() {
        let p = &ens.particles[i];
        let c = &ens.classifiers[i];
        let trace = forward_trace(p, &batch.x)?;
        let lg = loglik_and_grads(c, trace.features(), &batch.y)?;
        stats.loglik += lg.loglik;
        stats.correct += lg.correct;
        let mut g = backprop_trace(p, &trace, &lg.g_feat)?;
        g.extend_from_slice(&lg.g_theta);
        g.iter_mut().for_each(|v| *v *= inv_b);
        let mut w = p.params().to_vec();
        w.extend_from_slice(c.params());
        weights.push(w);
        driving.push(g);
    }
    let reps = repulsions(cfg, &weights, &driving)?;

    for (i, (g, rep)) in driving.into_iter().zip(reps).enumerate() {
        stats.repulsion_norm += norm(&rep);
        let prior = scaled_prior(cfg, &weights[i])?;
        let total = assemble_direction(g, prior, rep)?.total();
        let dir: Vec<f64> = total
            .iter()
            .zip(&weights[i])
            .map(|(d, w)| d - cfg.weight_decay * w)
            .collect();
        let split = ens.particles[i].params().len();
        apply_update(cfg, ens.particles[i].params_mut(), &mut opt.particles[i], &dir[..split], lr);
        apply_update(cfg, ens.classifiers[i].params_mut(), &mut opt.classifiers[i], &dir[split..], lr);
    }
    Ok(stats)
}

/// WGD on the batch logits of each member, pulled back through the whole
/// network (per-member heads).
pub fn function_wgd_step(
    ens: &mut Ensemble,
    opt: &mut OptimizerState,
    batch: &Batch,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<StepStats> {
    require_per_member(ens, Space::Function)?;
    let b = batch.len();
    let inv_b = 1.0 / b as f64;
    let mut stats = StepStats { particles: ens.len(), batch_size: b, ..StepStats::default() };

    let mut traces = Vec::with_capacity(ens.len());
    let mut logits = Vec::with_capacity(ens.len());
    let mut g_logits = Vec::with_capacity(ens.len());
    for i in 0..ens.len() {
        let trace = forward_trace(&ens.particles[i], &batch.x)?;
        let l = forward_classifier(&ens.classifiers[i], trace.features())?;
        let (ll, g, correct) = logit_loglik_and_grad(&l.values, &batch.y)?;
        stats.loglik += ll;
        stats.correct += correct;
        traces.push(trace);
        logits.push(l.values.into_vec());
        g_logits.push(g.into_vec());
    }
    let reps = repulsions(cfg, &logits, &g_logits)?;

    let classes = ens.classes();
    for (i, ((trace, g), rep)) in traces.into_iter().zip(g_logits).zip(reps).enumerate() {
        stats.repulsion_norm += norm(&rep);
        let prior = scaled_prior(cfg, &logits[i])?;
        let v_f = Matrix::from_vec(b, classes, assemble_direction(g, prior, rep)?.total())?;
        let (g_theta, g_feat) = classifier_vjp(&ens.classifiers[i], trace.features(), &v_f)?;
        let grad_w = backprop_trace(&ens.particles[i], &trace, &g_feat)?;
        let v_w = batch_direction(&grad_w, inv_b, cfg.weight_decay, ens.particles[i].params());
        let v_theta = batch_direction(&g_theta, inv_b, cfg.weight_decay, ens.classifiers[i].params());
        apply_update(cfg, ens.particles[i].params_mut(), &mut opt.particles[i], &v_w, lr);
        apply_update(cfg, ens.classifiers[i].params_mut(), &mut opt.classifiers[i], &v_theta, lr);
    }
    Ok(stats)
}

/// Dispatches on `cfg.space`.
pub fn step(ens: &mut Ensemble, opt: &mut OptimizerState, batch: &Batch, cfg: &TrainConfig, lr: f64) -> Result<StepStats> {
    match cfg.space {
        Space::Feature => feature_wgd_step(ens, opt, batch, cfg, lr),
        Space::Weight => weight_wgd_step(ens, opt, batch, cfg, lr),
        Space::Function => function_wgd_step(ens, opt, batch, cfg, lr),
        Space::None => deep_ensembles_step(ens, opt, batch, cfg, lr),
    }
}
