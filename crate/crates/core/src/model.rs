//! Ensemble members `c(·; θ) ∘ h(·; wᵢ)`: a ReLU MLP feature extractor per
//! particle and a linear classifier head.
//!
//! All gradients here are for the SUM of the log-likelihood over the batch;
//! averaging over the batch is left to the training engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngState;

/// Weights of one feature extractor, flattened layer by layer. Layer `l` maps
/// `sizes[l]` inputs to `sizes[l + 1]` outputs and is stored as a row-major
/// `sizes[l] × sizes[l + 1]` weight block followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub index: usize,
    sizes: Vec<usize>,
    params: Vec<f64>,
}

pub fn extractor_param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Particle {
    pub fn zeros(index: usize, sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(
                "layer_sizes",
                format!("need input and feature widths, all nonzero; got {sizes:?}"),
            ));
        }
        Ok(Particle {
            index,
            sizes: sizes.to_vec(),
            params: vec![0.0; extractor_param_count(sizes)],
        })
    }

    /// He-uniform initialisation: weights ~ U(±√(6 / fan_in)), zero biases.
    pub fn he_uniform(index: usize, sizes: &[usize], rng: &mut RngState) -> Result<Self> {
        let mut p = Particle::zeros(index, sizes)?;
        for l in 0..p.num_layers() {
            let limit = (6.0 / p.sizes[l] as f64).sqrt();
            let (w, _) = p.layer_range(l);
            for v in &mut p.params[w] {
                *v = rng.uniform(-limit, limit);
            }
        }
        Ok(p)
    }

    pub fn from_params(index: usize, sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut p = Particle::zeros(index, sizes)?;
        if params.len() != p.params.len() {
            return Err(Error::dims(
                "Particle::from_params",
                format!("{} values for {} parameters", params.len(), p.params.len()),
            ));
        }
        p.params = params;
        Ok(p)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn feature_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start: usize = extractor_param_count(&self.sizes[..=l]);
        let w_len = self.sizes[l] * self.sizes[l + 1];
        let b_len = self.sizes[l + 1];
        (start..start + w_len, start + w_len..start + w_len + b_len)
    }

    /// `(weights, bias)` of layer `l`; weights are `sizes[l] × sizes[l+1]`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.layer_range(l);
        (&self.params[w], &self.params[b])
    }
}

/// Linear head: `logits = h·W + b` with `W` of shape `H × C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedClassifier {
    feature_dim: usize,
    classes: usize,
    params: Vec<f64>,
}

impl SharedClassifier {
    pub fn zeros(feature_dim: usize, classes: usize) -> Self {
        SharedClassifier {
            feature_dim,
            classes,
            params: vec![0.0; feature_dim * classes + classes],
        }
    }

    /// Weights ~ U(±1/√H), zero bias.
    pub fn init(feature_dim: usize, classes: usize, rng: &mut RngState) -> Self {
        let mut c = SharedClassifier::zeros(feature_dim, classes);
        let limit = 1.0 / (feature_dim as f64).sqrt();
        let n_w = feature_dim * classes;
        for v in &mut c.params[..n_w] {
            *v = rng.uniform(-limit, limit);
        }
        c
    }

    pub fn from_parts(weight: &Matrix, bias: &[f64]) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::dims(
                "SharedClassifier::from_parts",
                format!("bias of length {} for {} classes", bias.len(), weight.cols()),
            ));
        }
        let mut params = weight.as_slice().to_vec();
        params.extend_from_slice(bias);
        Ok(SharedClassifier {
            feature_dim: weight.rows(),
            classes: weight.cols(),
            params,
        })
    }

    pub fn from_params(feature_dim: usize, classes: usize, params: Vec<f64>) -> Result<Self> {
        let mut c = SharedClassifier::zeros(feature_dim, classes);
        if params.len() != c.params.len() {
            return Err(Error::dims(
                "SharedClassifier::from_params",
                format!("{} values for {} parameters", params.len(), c.params.len()),
            ));
        }
        c.params = params;
        Ok(c)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weight(&self) -> &[f64] {
        &self.params[..self.feature_dim * self.classes]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.feature_dim * self.classes..]
    }

    fn weight_matrix(&self) -> Matrix {
        Matrix::from_vec(self.feature_dim, self.classes, self.weight().to_vec())
            .expect("classifier weight block has H×C entries")
    }
}

/// Features `h(x; wᵢ)` of one particle on a batch, `B × H`, all entries ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub particle: usize,
    pub values: Matrix,
}

impl FeatureBatch {
    pub fn batch_size(&self) -> usize {
        self.values.rows()
    }

    /// Row-major flattening, length `B·H`.
    pub fn flat(&self) -> &[f64] {
        self.values.as_slice()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitBatch {
    pub particle: usize,
    pub values: Matrix,
}

/// Intermediate values of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct FeatureTrace {
    /// Input of each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
    features: FeatureBatch,
}

impl FeatureTrace {
    pub fn features(&self) -> &FeatureBatch {
        &self.features
    }

    pub fn into_features(self) -> FeatureBatch {
        self.features
    }
}

fn relu_inplace(m: &mut Matrix) {
    for v in m.as_mut_slice() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
}

fn add_bias(m: &mut Matrix, bias: &[f64]) {
    for r in 0..m.rows() {
        for (v, b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (acc, v) in s.iter_mut().zip(m.row(r)) {
            *acc += v;
        }
    }
    s
}

/// Forward pass keeping every intermediate needed by [`backprop_trace`].
pub fn forward_trace(p: &Particle, x: &Matrix) -> Result<FeatureTrace> {
    if x.cols() != p.input_dim() {
        return Err(Error::dims(
            "forward_features",
            format!("input has {} columns, extractor expects {}", x.cols(), p.input_dim()),
        ));
    }
    let mut inputs = Vec::with_capacity(p.num_layers());
    let mut pre = Vec::with_capacity(p.num_layers());
    let mut act = x.clone();
    for l in 0..p.num_layers() {
        let (w, b) = p.layer(l);
        let w = Matrix::from_vec(p.sizes[l], p.sizes[l + 1], w.to_vec())?;
        let mut z = act.matmul(&w)?;
        add_bias(&mut z, b);
        let mut next = z.clone();
        relu_inplace(&mut next);
        inputs.push(act);
        pre.push(z);
        act = next;
    }
    Ok(FeatureTrace {
        inputs,
        pre,
        features: FeatureBatch {
            particle: p.index,
            values: act,
        },
    })
}

/// `h(x; w)`: ReLU on every layer including the last, so features are ≥ 0.
pub fn forward_features(p: &Particle, x: &Matrix) -> Result<FeatureBatch> {
    forward_trace(p, x).map(FeatureTrace::into_features)
}

pub fn forward_classifier(c: &SharedClassifier, h: &FeatureBatch) -> Result<LogitBatch> {
    if h.values.cols() != c.feature_dim {
        return Err(Error::dims(
            "forward_classifier",
            format!("features have width {}, classifier expects {}", h.values.cols(), c.feature_dim),
        ));
    }
    let mut logits = h.values.matmul(&c.weight_matrix())?;
    add_bias(&mut logits, c.bias());
    Ok(LogitBatch {
        particle: h.particle,
        values: logits,
    })
}

/// Vector-Jacobian product `(∂vec(h)/∂w)ᵀ · vec(v_feat)` through a recorded pass.
pub fn backprop_trace(p: &Particle, trace: &FeatureTrace, v_feat: &Matrix) -> Result<Vec<f64>> {
    let out = &trace.features.values;
    if v_feat.shape() != out.shape() {
        return Err(Error::dims(
            "backprop_to_weights",
            format!("cotangent {:?} vs features {:?}", v_feat.shape(), out.shape()),
        ));
    }
    let mut grad = vec![0.0; p.params.len()];
    let mut delta = v_feat.clone();
    for l in (0..p.num_layers()).rev() {
        for (d, z) in delta.as_mut_slice().iter_mut().zip(trace.pre[l].as_slice()) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        let (w_range, b_range) = p.layer_range(l);
        let gw = trace.inputs[l].matmul_tn(&delta)?;
        grad[w_range.clone()].copy_from_slice(gw.as_slice());
        grad[b_range].copy_from_slice(&column_sums(&delta));
        if l > 0 {
            let w = Matrix::from_vec(p.sizes[l], p.sizes[l + 1], p.params[w_range].to_vec())?;
            delta = delta.matmul_nt(&w)?;
        }
    }
    Ok(grad)
}

pub fn backprop_to_weights(p: &Particle, x: &Matrix, v_feat: &Matrix) -> Result<Vec<f64>> {
    let trace = forward_trace(p, x)?;
    backprop_trace(p, &trace, v_feat)
}

/// Log-likelihood of a batch and its exact gradients.
#[derive(Debug, Clone)]
pub struct LikelihoodGrads {
    /// `Σ_b log softmax(logits_b)[y_b]`
    pub loglik: f64,
    /// `∂/∂h`, `B × H`
    pub g_feat: Matrix,
    /// `∂/∂θ`, laid out like [`SharedClassifier::params`]
    pub g_theta: Vec<f64>,
    /// `onehot(y) − softmax(logits)`, `B × C`
    pub g_logit: Matrix,
    /// Rows whose arg-max logit equals the label.
    pub correct: usize,
}

fn check_labels(y: &[usize], rows: usize, classes: usize) -> Result<()> {
    if y.len() != rows {
        return Err(Error::dims(
            "loglik_and_grads",
            format!("{} labels for {rows} rows", y.len()),
        ));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

/// Row-wise softmax of `logits / temperature`.
pub fn softmax_rows(logits: &Matrix, temperature: f64) -> Matrix {
    let mut out = logits.scaled(1.0 / temperature);
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Log-likelihood and `onehot − softmax` for raw logits.
pub fn logit_loglik_and_grad(logits: &Matrix, y: &[usize]) -> Result<(f64, Matrix, usize)> {
    check_labels(y, logits.rows(), logits.cols())?;
    let logp = log_softmax_rows(logits);
    let mut loglik = 0.0;
    let mut correct = 0;
    let mut g = Matrix::zeros(logits.rows(), logits.cols());
    for (b, &label) in y.iter().enumerate() {
        loglik += logp[(b, label)];
        if argmax(logits.row(b)) == label {
            correct += 1;
        }
        for (k, gk) in g.row_mut(b).iter_mut().enumerate() {
            let onehot = if k == label { 1.0 } else { 0.0 };
            *gk = onehot - logp[(b, k)].exp();
        }
    }
    Ok((loglik, g, correct))
}

/// Pulls a logit cotangent `v` (`B × C`) back to the classifier parameters and
/// the features: returns `(hᵀv ‖ Σ_b v_b, v·Wᵀ)`.
pub fn classifier_vjp(
    c: &SharedClassifier,
    h: &FeatureBatch,
    v_logit: &Matrix,
) -> Result<(Vec<f64>, Matrix)> {
    if v_logit.rows() != h.values.rows() || v_logit.cols() != c.classes {
        return Err(Error::dims(
            "classifier_vjp",
            format!("cotangent {:?} for {} rows and {} classes", v_logit.shape(), h.values.rows(), c.classes),
        ));
    }
    let gw = h.values.matmul_tn(v_logit)?;
    let mut g_theta = gw.into_vec();
    g_theta.extend(column_sums(v_logit));
    let g_feat = v_logit.matmul_nt(&c.weight_matrix())?;
    Ok((g_theta, g_feat))
}

pub fn loglik_and_grads(
    c: &SharedClassifier,
    h: &FeatureBatch,
    y: &[usize],
) -> Result<LikelihoodGrads> {
    let logits = forward_classifier(c, h)?;
    let (loglik, g_logit, correct) = logit_loglik_and_grad(&logits.values, y)?;
    let (g_theta, g_feat) = classifier_vjp(c, h, &g_logit)?;
    Ok(LikelihoodGrads {
        loglik,
        g_feat,
        g_theta,
        g_logit,
        correct,
    })
}

pub fn member_logits(p: &Particle, c: &SharedClassifier, x: &Matrix) -> Result<Matrix> {
    let h = forward_features(p, x)?;
    Ok(forward_classifier(c, &h)?.values)
}

/// Mean of softmax probabilities over logit sets, each divided by `temperature`.
pub fn average_probabilities(member_logits: &[Matrix], temperature: f64) -> Result<Matrix> {
    let first = member_logits.first().ok_or(Error::EmptyEnsemble)?;
    let mut acc = Matrix::zeros(first.rows(), first.cols());
    for logits in member_logits {
        if logits.shape() != first.shape() {
            return Err(Error::dims("average_probabilities", "members disagree on shape"));
        }
        let p = softmax_rows(logits, temperature);
        for (a, v) in acc.as_mut_slice().iter_mut().zip(p.as_slice()) {
            *a += v;
        }
    }
    Ok(acc.scaled(1.0 / member_logits.len() as f64))
}

/// `(1/n) Σᵢ softmax(c(h(x; wᵢ); θ))`
pub fn ensemble_predict(particles: &[Particle], c: &SharedClassifier, x: &Matrix) -> Result<Matrix> {
    if particles.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let logits = particles
        .iter()
        .map(|p| member_logits(p, c, x))
        .collect::<Result<Vec<_>>>()?;
    average_probabilities(&logits, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_particle(seed: u64, sizes: &[usize]) -> Particle {
        let mut rng = RngState::new(seed);
        let mut p = Particle::zeros(0, sizes).unwrap();
        for v in p.params_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        p
    }

    fn random_matrix(rng: &mut RngState, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let p = Particle::zeros(0, &[3, 4, 2]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]]).unwrap();
        let h = forward_features(&p, &x).unwrap();
        assert_eq!(h.values, Matrix::zeros(2, 2));
    }

    #[test]
    fn identity_layer_applies_relu() {
        let p = Particle::from_params(0, &[2, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0]]).unwrap();
        let h = forward_features(&p, &x).unwrap();
        assert_eq!(h.values.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let sizes = [3, 5, 4];
        let p = random_particle(11, &sizes);
        let mut rng = RngState::new(12);
        let x = random_matrix(&mut rng, 6, 3);
        let h = forward_features(&p, &x).unwrap();
        let params = p.params();
        // layer 0: 3x5 weights at 0..15, bias 15..20; layer 1: 5x4 at 20..40, bias 40..44
        for b in 0..6 {
            let mut hidden = [0.0; 5];
            for (j, hj) in hidden.iter_mut().enumerate() {
                let mut s = params[15 + j];
                for i in 0..3 {
                    s += x[(b, i)] * params[i * 5 + j];
                }
                *hj = s.max(0.0);
            }
            for k in 0..4 {
                let mut s = params[40 + k];
                for j in 0..5 {
                    s += hidden[j] * params[20 + j * 4 + k];
                }
                assert_abs_diff_eq!(h.values[(b, k)], s.max(0.0), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = Particle::zeros(0, &[3, 2]).unwrap();
        assert!(forward_features(&p, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn zero_classifier_gives_bias_rows() {
        let w = Matrix::zeros(3, 2);
        let c = SharedClassifier::from_parts(&w, &[0.5, -1.0]).unwrap();
        let h = FeatureBatch {
            particle: 0,
            values: Matrix::from_rows(&[[1.0, 2.0, 3.0], [0.0, 0.0, 9.0]]).unwrap(),
        };
        let l = forward_classifier(&c, &h).unwrap();
        assert_eq!(l.values.row(0), &[0.5, -1.0]);
        assert_eq!(l.values.row(1), &[0.5, -1.0]);
    }

    #[test]
    fn one_hot_feature_selects_weight_row() {
        let w = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let c = SharedClassifier::from_parts(&w, &[0.1, 0.2]).unwrap();
        let h = FeatureBatch {
            particle: 0,
            values: Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap(),
        };
        let l = forward_classifier(&c, &h).unwrap();
        assert_eq!(l.values.row(0), &[3.1, 4.2]);
    }

    #[test]
    fn classifier_matches_matmul_oracle() {
        let mut rng = RngState::new(5);
        let w = random_matrix(&mut rng, 4, 3);
        let bias: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let c = SharedClassifier::from_parts(&w, &bias).unwrap();
        let hv = random_matrix(&mut rng, 5, 4);
        let l = forward_classifier(&c, &FeatureBatch { particle: 0, values: hv.clone() }).unwrap();
        let expect = hv.matmul(&w).unwrap();
        for b in 0..5 {
            for k in 0..3 {
                assert_abs_diff_eq!(l.values[(b, k)], expect[(b, k)] + bias[k], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn uniform_logits_give_minus_b_log_c() {
        let c = SharedClassifier::zeros(2, 4);
        let h = FeatureBatch { particle: 0, values: Matrix::zeros(3, 2) };
        let g = loglik_and_grads(&c, &h, &[0, 3, 1]).unwrap();
        assert_abs_diff_eq!(g.loglik, -3.0 * 4.0_f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(g.g_logit[(0, 0)], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(g.g_logit[(0, 1)], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(g.g_logit[(1, 3)], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn saturated_softmax_has_vanishing_gradient() {
        let w = Matrix::from_rows(&[[100.0, -100.0]]).unwrap();
        let c = SharedClassifier::from_parts(&w, &[0.0, 0.0]).unwrap();
        let h = FeatureBatch { particle: 0, values: Matrix::from_rows(&[[1.0]]).unwrap() };
        let g = loglik_and_grads(&c, &h, &[0]).unwrap();
        assert!(g.g_logit.max_abs() < 1e-80);
        assert!(g.loglik.abs() < 1e-80);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let c = SharedClassifier::zeros(2, 3);
        let h = FeatureBatch { particle: 0, values: Matrix::zeros(1, 2) };
        assert!(matches!(
            loglik_and_grads(&c, &h, &[3]),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn zero_cotangent_gives_zero_gradient() {
        let p = random_particle(1, &[3, 4, 2]);
        let x = random_matrix(&mut RngState::new(2), 5, 3);
        let g = backprop_to_weights(&p, &x, &Matrix::zeros(5, 2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_hidden_unit_by_hand() {
        // h = relu(w2 · relu(w1·x + b1) + b2), x scalar
        let (w1, b1, w2, b2) = (0.5, 0.25, -1.5, 2.0);
        let p = Particle::from_params(0, &[1, 1, 1], vec![w1, b1, w2, b2]).unwrap();
        let x = 2.0;
        let a1 = w1 * x + b1; // 1.25 > 0
        let a2 = w2 * a1 + b2; // 0.125 > 0
        assert!(a1 > 0.0 && a2 > 0.0);
        let v = 3.0;
        let g = backprop_to_weights(
            &p,
            &Matrix::from_rows(&[[x]]).unwrap(),
            &Matrix::from_rows(&[[v]]).unwrap(),
        )
        .unwrap();
        let expect = [v * w2 * x, v * w2, v * a1, v];
        for (a, b) in g.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn ensemble_of_one_is_softmax() {
        let p = random_particle(3, &[2, 3]);
        let mut rng = RngState::new(4);
        let c = SharedClassifier::init(3, 4, &mut rng);
        let x = random_matrix(&mut rng, 5, 2);
        let probs = ensemble_predict(std::slice::from_ref(&p), &c, &x).unwrap();
        let direct = softmax_rows(&member_logits(&p, &c, &x).unwrap(), 1.0);
        assert_eq!(probs, direct);
        let twice = ensemble_predict(&[p.clone(), p], &c, &x).unwrap();
        for (a, b) in twice.as_slice().iter().zip(direct.as_slice()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_member_average_by_hand() {
        // one input unit, identity extractor; features 1 and 0 after relu of ±1
        let a = Particle::from_params(0, &[1, 1], vec![1.0, 0.0]).unwrap();
        let b = Particle::from_params(1, &[1, 1], vec![-1.0, 0.0]).unwrap();
        let w = Matrix::from_rows(&[[2.0_f64.ln(), 0.0]]).unwrap();
        let c = SharedClassifier::from_parts(&w, &[0.0, 0.0]).unwrap();
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        let probs = ensemble_predict(&[a, b], &c, &x).unwrap();
        // member a: logits (ln 2, 0) → (2/3, 1/3); member b: (0, 0) → (1/2, 1/2)
        assert_abs_diff_eq!(probs[(0, 0)], (2.0 / 3.0 + 0.5) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(probs[(0, 1)], (1.0 / 3.0 + 0.5) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_ensemble_is_an_error() {
        let c = SharedClassifier::zeros(2, 2);
        assert!(matches!(
            ensemble_predict(&[], &c, &Matrix::zeros(1, 2)),
            Err(Error::EmptyEnsemble)
        ));
    }
}
