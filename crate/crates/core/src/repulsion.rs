//! Kernel-density repulsion between particles and its restriction to the
//! dominant subspace of the log-likelihood gradients.
//!
//! With particles `x_1..x_n` and an RBF kernel `k`, the density estimate
//! `q(x) ∝ Σ_j k(x, x_j)` gives the score approximation
//!
//! ```text
//! ∇ log q(x_i) ≈ Σ_j ∇_{x_i} k(x_i, x_j) / Σ_j k(x_i, x_j)
//! ```
//!
//! which is subtracted from the driving term. In feature space the score is
//! evaluated on `z_j = Ψᵀ h_j`, where `Ψ` spans the top eigenvectors of
//! `H = (1/n) Σ_i g_i g_iᵀ` built from the per-particle likelihood gradients,
//! and mapped back with `Ψ`.

use crate::error::{Error, Result};
use crate::linalg::{dot, thin_svd_tall, Matrix};
use crate::priors::{rbf_kernel, KernelSpec};

/// `Σ_j ∇_{z_i} k(z_i, z_j) / Σ_j k(z_i, z_j)` over the rows of `points`.
///
/// The self term contributes `k = 1` and a zero gradient, so the denominator
/// is at least one.
pub fn kde_repulsion(points: &Matrix, i: usize, h: f64) -> Vec<f64> {
    let zi = points.row(i);
    let mut num = vec![0.0; points.cols()];
    let mut den = 0.0;
    for j in 0..points.rows() {
        let zj = points.row(j);
        let k = rbf_kernel(zi, zj, h);
        den += k;
        for ((acc, a), b) in num.iter_mut().zip(zi).zip(zj) {
            *acc += -2.0 / h * (a - b) * k;
        }
    }
    num.iter_mut().for_each(|v| *v /= den);
    num
}

/// Repulsion for every particle with a bandwidth chosen from the whole set.
pub fn kde_repulsion_all(points: &Matrix, kernel: &KernelSpec) -> (Vec<Vec<f64>>, f64) {
    let h = kernel.bandwidth_for(points);
    let out = (0..points.rows()).map(|i| kde_repulsion(points, i, h)).collect();
    (out, h)
}

/// Orthonormal basis `Ψ` (`D × k`) of the dominant gradient subspace.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    basis: Matrix,
    requested_r: usize,
}

impl ProjectionBasis {
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn requested_r(&self) -> usize {
        self.requested_r
    }

    pub fn effective_k(&self) -> usize {
        self.basis.cols()
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// `Ψᵀ v`
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let k = self.effective_k();
        let mut z = vec![0.0; k];
        for (r, &vr) in v.iter().enumerate() {
            let row = self.basis.row(r);
            for (zc, b) in z.iter_mut().zip(row) {
                *zc += b * vr;
            }
        }
        z
    }

    /// `Ψ z`
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|r| dot(self.basis.row(r), z)).collect()
    }

    /// Rows `Ψᵀ x_j` for every particle vector.
    pub fn project_all<V: AsRef<[f64]>>(&self, vectors: &[V]) -> Matrix {
        let k = self.effective_k();
        let mut z = Matrix::zeros(vectors.len(), k);
        for (j, v) in vectors.iter().enumerate() {
            z.row_mut(j).copy_from_slice(&self.project(v.as_ref()));
        }
        z
    }
}

/// Top-`min(r, rank)` eigenvectors of `Σ_i g_i g_iᵀ`, obtained as the left
/// singular vectors of the `D × n` gradient stack.
pub fn build_basis<V: AsRef<[f64]>>(grads: &[V], r: usize) -> Result<ProjectionBasis> {
    if r == 0 {
        return Err(Error::config("r", "projection dimension must be at least 1"));
    }
    if grads.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let stack = Matrix::from_columns(grads)?;
    let svd = thin_svd_tall(&stack)?;
    let k = svd.rank().min(r);
    let d = stack.rows();
    let mut basis = Matrix::zeros(d, k);
    for row in 0..d {
        basis.row_mut(row).copy_from_slice(&svd.u.row(row)[..k]);
    }
    Ok(ProjectionBasis {
        basis,
        requested_r: r,
    })
}

/// Repulsion for particle `i` from already projected coordinates, lifted back
/// to the full space.
pub fn repulsion_from_projected(basis: &ProjectionBasis, z: &Matrix, i: usize, h: f64) -> Vec<f64> {
    if basis.effective_k() == 0 {
        return vec![0.0; basis.dim()];
    }
    basis.lift(&kde_repulsion(z, i, h))
}

/// `Ψ · Σ_j ∇k(z_i, z_j) / Σ_j k(z_i, z_j)` with `z_j = Ψᵀ x_j` and the
/// bandwidth chosen on `{z_j}`. Zero when the basis is empty.
pub fn projected_repulsion<V: AsRef<[f64]>>(
    basis: &ProjectionBasis,
    features: &[V],
    i: usize,
    kernel: &KernelSpec,
) -> Vec<f64> {
    if basis.effective_k() == 0 {
        return vec![0.0; basis.dim()];
    }
    let z = basis.project_all(features);
    let h = kernel.bandwidth_for(&z);
    repulsion_from_projected(basis, &z, i, h)
}

/// Parts of one particle's update direction; the repulsion is stored with a
/// positive sign and subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDirection {
    pub driving: Vec<f64>,
    pub prior: Vec<f64>,
    pub repulsion: Vec<f64>,
}

impl UpdateDirection {
    /// `driving + prior − repulsion`
    pub fn total(&self) -> Vec<f64> {
        self.driving
            .iter()
            .zip(&self.prior)
            .zip(&self.repulsion)
            .map(|((d, p), r)| d + p - r)
            .collect()
    }
}

pub fn assemble_direction(driving: Vec<f64>, prior: Vec<f64>, repulsion: Vec<f64>) -> Result<UpdateDirection> {
    if driving.len() != prior.len() || driving.len() != repulsion.len() {
        return Err(Error::dims(
            "assemble_direction",
            format!("lengths {}, {}, {}", driving.len(), prior.len(), repulsion.len()),
        ));
    }
    Ok(UpdateDirection {
        driving,
        prior,
        repulsion,
    })
}
