//! Evaluation: accuracy, NLL, Brier, ECE, temperature scaling and a feature
//! diversity score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{argmax, average_probabilities, forward_features, Particle};

pub const PROB_CLIP: f64 = 1e-12;
pub const DEFAULT_BINS: usize = 15;
pub const TEMPERATURE_RANGE: (f64, f64) = (0.05, 20.0);
pub const TEMPERATURE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub nll: f64,
    pub brier: f64,
    pub ece: f64,
    pub temperature: f64,
    pub mean_pairwise_feature_similarity: f64,
}

fn check(probs: &Matrix, labels: &[usize], op: &'static str) -> Result<()> {
    if probs.rows() != labels.len() {
        return Err(Error::dims(op, format!("{} rows, {} labels", probs.rows(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset("evaluation set"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= probs.cols()) {
        return Err(Error::LabelOutOfRange { label: l, classes: probs.cols() });
    }
    Ok(())
}

pub fn accuracy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check(probs, labels, "accuracy")?;
    let hits = labels.iter().enumerate().filter(|(b, &y)| argmax(probs.row(*b)) == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `−(1/N) Σ log p[b, y_b]`, probabilities clipped below at 1e-12.
pub fn nll(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check(probs, labels, "nll")?;
    let total: f64 = labels.iter().enumerate().map(|(b, &y)| -probs[(b, y)].max(PROB_CLIP).ln()).sum();
    Ok(total / labels.len() as f64)
}

/// `(1/N) Σ ‖p_b − onehot(y_b)‖²`
pub fn brier(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check(probs, labels, "brier")?;
    let mut total = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        for (c, p) in probs.row(b).iter().enumerate() {
            let t = if c == y { 1.0 } else { 0.0 };
            total += (p - t) * (p - t);
        }
    }
    Ok(total / labels.len() as f64)
}

/// Expected calibration error over `bins` equal-width confidence bins. Bin `k`
/// holds confidences in `(k/bins, (k+1)/bins]`, the first bin also holds 0.
pub fn ece(probs: &Matrix, labels: &[usize], bins: usize) -> Result<f64> {
    check(probs, labels, "ece")?;
    if bins == 0 {
        return Err(Error::config("bins", "must be at least 1"));
    }
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0.0; bins];
    for (b, &y) in labels.iter().enumerate() {
        let row = probs.row(b);
        let pred = argmax(row);
        let c = row[pred];
        let k = ((c * bins as f64).ceil() as usize).clamp(1, bins) - 1;
        count[k] += 1;
        conf[k] += c;
        if pred == y {
            hits[k] += 1.0;
        }
    }
    let n = labels.len() as f64;
    Ok((0..bins)
        .filter(|&k| count[k] > 0)
        .map(|k| (hits[k] - conf[k]).abs() / n)
        .sum())
}

fn nll_at(member_logits: &[Matrix], labels: &[usize], t: f64) -> Result<f64> {
    nll(&average_probabilities(member_logits, t)?, labels)
}

/// Single temperature for the whole ensemble: every member's logits are divided
/// by `T` before the probabilities are averaged. Golden-section search on
/// `[0.05, 20]`; falls back to `T = 1` if that scores at least as well.
pub fn temperature_scale(member_logits: &[Matrix], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() || member_logits.iter().any(|m| m.rows() == 0) {
        return Err(Error::EmptyDataset("validation split"));
    }
    if member_logits.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = TEMPERATURE_RANGE;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = nll_at(member_logits, labels, c)?;
    let mut fd = nll_at(member_logits, labels, d)?;
    while b - a > TEMPERATURE_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = nll_at(member_logits, labels, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = nll_at(member_logits, labels, d)?;
        }
    }
    let t = 0.5 * (a + b);
    if nll_at(member_logits, labels, t)? <= nll_at(member_logits, labels, 1.0)? {
        Ok(t)
    } else {
        Ok(1.0)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Cosine similarity of member features, averaged over member pairs and
/// inputs. A zero feature vector counts as similarity 0. A single member
/// gives 1.
pub fn feature_similarity(particles: &[Particle], x: &Matrix) -> Result<f64> {
    let n = particles.len();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if x.rows() == 0 {
        return Err(Error::EmptyDataset("feature similarity inputs"));
    }
    if n == 1 {
        return Ok(1.0);
    }
    let feats = particles
        .iter()
        .map(|p| forward_features(p, x))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for b in 0..x.rows() {
        for i in 0..n {
            for j in i + 1..n {
                total += cosine(feats[i].values.row(b), feats[j].values.row(b));
            }
        }
    }
    Ok(total / (x.rows() * n * (n - 1) / 2) as f64)
}

/// All metrics of one ensemble on one evaluation set at temperature `t`.
pub fn evaluate(
    particles: &[Particle],
    member_logits: &[Matrix],
    x: &Matrix,
    labels: &[usize],
    t: f64,
    bins: usize,
) -> Result<MetricsReport> {
    let probs = average_probabilities(member_logits, t)?;
    Ok(MetricsReport {
        accuracy: accuracy(&probs, labels)?,
        nll: nll(&probs, labels)?,
        brier: brier(&probs, labels)?,
        ece: ece(&probs, labels, bins)?,
        temperature: t,
        mean_pairwise_feature_similarity: feature_similarity(particles, x)?,
    })
}
