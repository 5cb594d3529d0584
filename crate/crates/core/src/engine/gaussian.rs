//! WGD against an analytic Gaussian target, for checking the particle
//! machinery without a network in the loop.

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eig, Matrix};
use crate::priors::KernelSpec;
use crate::repulsion::kde_repulsion_all;
use crate::rng::{streams, RngState};

#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    cov: Matrix,
    precision: Matrix,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        let d = mean.len();
        if cov.shape() != (d, d) {
            return Err(Error::dims(
                "GaussianTarget::new",
                format!("mean of length {d}, covariance {:?}", cov.shape()),
            ));
        }
        let eig = symmetric_eig(&cov)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        // Σ⁻¹ = V diag(1/λ) Vᵀ
        let mut precision = Matrix::zeros(d, d);
        for (k, &lambda) in eig.values.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    precision[(i, j)] += eig.vectors[(i, k)] * eig.vectors[(j, k)] / lambda;
                }
            }
        }
        Ok(GaussianTarget { mean, cov, precision })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    /// `∇ log p(x) = Σ⁻¹(μ − x)`
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = self.mean.iter().zip(x).map(|(m, v)| m - v).collect();
        (0..self.dim())
            .map(|i| crate::linalg::dot(self.precision.row(i), &diff))
            .collect()
    }
}

/// Runs `steps` simultaneous updates `x_i ← x_i + lr·(∇log p(x_i) − ∇log q̂(x_i))`
/// from the given initial particles (one per row).
pub fn gaussian_wgd_run(
    target: &GaussianTarget,
    init: Matrix,
    steps: usize,
    lr: f64,
    kernel: &KernelSpec,
) -> Result<Matrix> {
    if init.cols() != target.dim() {
        return Err(Error::dims(
            "gaussian_wgd_run",
            format!("particles of dimension {}, target of dimension {}", init.cols(), target.dim()),
        ));
    }
    let mut x = init;
    for step in 0..steps {
        let (reps, _) = kde_repulsion_all(&x, kernel);
        for (i, rep) in reps.iter().enumerate() {
            let drive = target.score(x.row(i));
            for ((xi, d), r) in x.row_mut(i).iter_mut().zip(&drive).zip(rep) {
                *xi += lr * (d - r);
            }
        }
        if !x.is_finite() {
            return Err(Error::NonFinite { step, what: "particle positions".into() });
        }
    }
    Ok(x)
}

/// `n` particles drawn from a standard normal (seeded) and moved by
/// [`gaussian_wgd_run`] with the median-heuristic kernel.
pub fn gaussian_wgd_sample(target: &GaussianTarget, n: usize, steps: usize, lr: f64, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut rng = RngState::derive(seed, streams::SANITY);
    let d = target.dim();
    let init = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.normal()).collect())?;
    gaussian_wgd_run(target, init, steps, lr, &KernelSpec::default())
}

/// Sample mean and (1/n-normalised) covariance of the rows.
pub fn sample_moments(points: &Matrix) -> (Vec<f64>, Matrix) {
    let (n, d) = points.shape();
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(points.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    for r in 0..n {
        let row = points.row(r);
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    (mean, cov.scaled(1.0 / n as f64))
}
