mod common;

use fwgd::linalg::{symmetric_eig, thin_svd_tall, Matrix};
use fwgd::metrics::{accuracy, brier, ece, nll, temperature_scale};
use fwgd::model::{average_probabilities, softmax_rows};
use fwgd::priors::median_bandwidth;
use fwgd::repulsion::kde_repulsion;
use proptest::prelude::*;

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    m.select_rows(perm)
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thin_svd_reconstructs_with_orthonormal_factors(g in matrix(8..40, 1..7)) {
        let svd = thin_svd_tall(&g).unwrap();
        let k = svd.s.len();
        let mut us = svd.u.clone();
        for r in 0..us.rows() {
            for c in 0..k {
                us.row_mut(r)[c] *= svd.s[c];
            }
        }
        let recon = us.matmul_nt(&svd.v.transpose().transpose()).unwrap();
        let scale = g.max_abs().max(1.0);
        prop_assert!(recon.sub(&g).unwrap().max_abs() < 1e-9 * scale);
        let utu = svd.u.matmul_tn(&svd.u).unwrap();
        prop_assert!(utu.sub(&Matrix::identity(k)).unwrap().max_abs() < 1e-10);
        prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eigenvalues_sum_to_the_trace(m in matrix(1..12, 1..2).prop_flat_map(|a| matrix(a.rows()..a.rows() + 1, a.rows()..a.rows() + 1))) {
        let a = m.matmul_tn(&m).unwrap().sub(&Matrix::identity(m.rows()).scaled(3.0)).unwrap();
        let eig = symmetric_eig(&a).unwrap();
        let sum: f64 = eig.values.iter().sum();
        prop_assert!((sum - a.trace()).abs() <= 1e-9 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn median_bandwidth_ignores_order_and_translation(
        (pts, perm) in matrix(1..12, 1..5).prop_flat_map(|m| { let n = m.rows(); (Just(m), permutation(n)) }),
        shift in -10.0f64..10.0,
    ) {
        let h = median_bandwidth(&pts);
        prop_assert_eq!(h, median_bandwidth(&permute_rows(&pts, &perm)));
        let mut moved = pts.clone();
        moved.as_mut_slice().iter_mut().for_each(|v| *v += shift);
        prop_assert!((median_bandwidth(&moved) - h).abs() <= 1e-9 * h.max(1.0));
    }

    #[test]
    fn repulsion_is_permutation_equivariant(
        (pts, perm) in matrix(2..9, 1..5).prop_flat_map(|m| { let n = m.rows(); (Just(m), permutation(n)) }),
        h in 0.1f64..10.0,
    ) {
        let permuted = permute_rows(&pts, &perm);
        for (new_i, &old_i) in perm.iter().enumerate() {
            let a = kde_repulsion(&pts, old_i, h);
            let b = kde_repulsion(&permuted, new_i, h);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn a_pair_moves_apart(a in prop::collection::vec(-3.0f64..3.0, 1..6), offset in prop::collection::vec(0.1f64..2.0, 6), h in 0.1f64..10.0) {
        let b: Vec<f64> = a.iter().zip(&offset).map(|(x, o)| x + o).collect();
        let pts = Matrix::from_rows(&[a.clone(), b.clone()]).unwrap();
        let ra = kde_repulsion(&pts, 0, h);
        let rb = kde_repulsion(&pts, 1, h);
        // the update subtracts the repulsion; the gap b − a must grow
        let growth: f64 = (0..a.len()).map(|k| (b[k] - a[k]) * (ra[k] - rb[k])).sum();
        prop_assert!(growth > 0.0);
        for (x, y) in ra.iter().zip(&rb) {
            prop_assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_ignore_sample_order(
        (logits, perm) in matrix(1..30, 2..6).prop_flat_map(|m| { let n = m.rows(); (Just(m), permutation(n)) }),
        seed in 0u64..1000,
    ) {
        let probs = softmax_rows(&logits, 1.0);
        let mut rng = fwgd::rng::RngState::new(seed);
        let y: Vec<usize> = (0..probs.rows()).map(|_| rng.below(probs.cols())).collect();
        let pp = permute_rows(&probs, &perm);
        let py: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        prop_assert!((nll(&probs, &y).unwrap() - nll(&pp, &py).unwrap()).abs() < 1e-12);
        prop_assert!((brier(&probs, &y).unwrap() - brier(&pp, &py).unwrap()).abs() < 1e-12);
        prop_assert!((ece(&probs, &y, 15).unwrap() - ece(&pp, &py, 15).unwrap()).abs() < 1e-12);
        prop_assert_eq!(accuracy(&probs, &y).unwrap(), accuracy(&pp, &py).unwrap());
        let b = brier(&probs, &y).unwrap();
        let e = ece(&probs, &y, 15).unwrap();
        prop_assert!((0.0..=2.0).contains(&b) && (0.0..=1.0).contains(&e));
    }

    #[test]
    fn temperature_never_hurts_validation_nll(members in prop::collection::vec(matrix(12..13, 3..4), 1..4), seed in 0u64..1000) {
        let mut rng = fwgd::rng::RngState::new(seed);
        let y: Vec<usize> = (0..12).map(|_| rng.below(3)).collect();
        let t = temperature_scale(&members, &y).unwrap();
        let at_t = nll(&average_probabilities(&members, t).unwrap(), &y).unwrap();
        let at_1 = nll(&average_probabilities(&members, 1.0).unwrap(), &y).unwrap();
        prop_assert!(t > 0.0);
        prop_assert!(at_t <= at_1);
    }
}
