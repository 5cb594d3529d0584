//! Dense eigendecomposition oracle for the projection basis.

use fwgd::linalg::{dot, norm, Matrix};
use fwgd::priors::KernelSpec;
use fwgd::repulsion::{build_basis, kde_repulsion, projected_repulsion};
use fwgd::rng::RngState;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::random_matrix;

/// `H = (1/n) Σ g gᵀ` and its dense eigendecomposition, eigenvalues descending.
fn dense_eigen(grads: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>, DMatrix<f64>) {
    let d = grads[0].len();
    let n = grads.len() as f64;
    let mut h = DMatrix::<f64>::zeros(d, d);
    for g in grads {
        let v = DVector::from_column_slice(g);
        h += &v * v.transpose() / n;
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    (values, vectors, h)
}

fn column(m: &Matrix, k: usize) -> Vec<f64> {
    (0..m.rows()).map(|r| m[(r, k)]).collect()
}

/// Worst sign-aligned eigenvector difference and worst relative eigen-residual
/// over `cases` random instances with `D ≤ 200`, `n ≤ 8`.
pub fn basis_errors(seed: u64, cases: usize) -> (f64, f64) {
    let mut rng = RngState::new(seed);
    let (mut worst_diff, mut worst_res) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let d = 5 + rng.below(196);
        let n = 1 + rng.below(8);
        let r = 1 + rng.below(n);
        let grads: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let basis = build_basis(&grads, r).unwrap();
        let (values, vectors, h) = dense_eigen(&grads);
        assert_eq!(basis.effective_k(), r);
        for k in 0..r {
            let psi = column(basis.basis(), k);
            let e = &vectors[k];
            let flip = if dot(&psi, e) < 0.0 { -1.0 } else { 1.0 };
            let diff: f64 = psi.iter().zip(e).map(|(a, b)| (a - flip * b).powi(2)).sum::<f64>().sqrt();
            let hv = &h * DVector::from_column_slice(&psi);
            let res: f64 = hv.iter().zip(&psi).map(|(a, b)| (a - values[k] * b).powi(2)).sum::<f64>().sqrt();
            worst_diff = worst_diff.max(diff);
            worst_res = worst_res.max(res / values[0].max(1.0));
        }
    }
    (worst_diff, worst_res)
}

/// Worst gap between full-rank projected repulsion and the span component of
/// the unprojected repulsion, for features inside the gradient span.
pub fn span_error(seed: u64, cases: usize) -> f64 {
    let mut rng = RngState::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let d = 10 + rng.below(100);
        let n = 2 + rng.below(7);
        let grads: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let basis = build_basis(&grads, n).unwrap();
        // inside the span the projected distances are exact
        let coeff = random_matrix(n, n, &mut rng, 1.0);
        let feats: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..d).map(|t| (0..n).map(|j| coeff[(i, j)] * grads[j][t]).sum()).collect())
            .collect();
        let kernel = KernelSpec::default();
        let full = Matrix::from_rows(&feats).unwrap();
        let h = kernel.bandwidth_for(&full);
        for i in 0..n {
            let projected = projected_repulsion(&basis, &feats, i, &kernel);
            let span_part = basis.lift(&basis.project(&kde_repulsion(&full, i, h)));
            let err: Vec<f64> = projected.iter().zip(&span_part).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&err));
        }
    }
    worst
}
