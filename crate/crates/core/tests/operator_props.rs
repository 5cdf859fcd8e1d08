use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use qclust::model::random_unit_hermitian;
use qclust::operator::{
    hermitian_eigenvalues, matrix_power_trace, matrix_power_trace_spectral, normalized_trace,
    operator_norm, tensor_embed, OperatorMatrix, SiteSpace, SparseOperator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_hermitian(dim: usize, seed: u64) -> OperatorMatrix {
    random_unit_hermitian(dim, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Matrix of the site permutation taking the ordering `sites` to `perm`.
fn site_permutation(n: usize, d: usize, perm: &[usize]) -> OperatorMatrix {
    let dim = d.pow(n as u32);
    let mut p = OperatorMatrix::zeros(dim);
    for i in 0..dim {
        let digits: Vec<usize> = (0..n).map(|k| (i / d.pow((n - 1 - k) as u32)) % d).collect();
        let j = (0..n).fold(0, |acc, k| acc * d + digits[perm[k]]);
        p.set(j, i, Complex64::new(1.0, 0.0));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn power_trace_routes_agree(seed in any::<u64>(), sites in 1usize..=4, n in 1usize..=8) {
        let space = SiteSpace::new((0..sites).collect(), 2).unwrap();
        let m = random_hermitian(space.total_dim(), seed).scale(1.7);
        let direct = matrix_power_trace(&m, n, &space).unwrap();
        let spectral = matrix_power_trace_spectral(&m, n, &space).unwrap();
        let scale = direct.norm().max(1e-300);
        prop_assert!((direct - spectral).norm() <= 1e-10 * scale.max(1e-6), "{direct} vs {spectral}");
        prop_assert!(direct.im.abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn embedding_is_multiplicative(seed in any::<u64>(), u in 0usize..4, v in 0usize..4) {
        prop_assume!(u != v);
        let space = SiteSpace::new(vec![0, 1, 2, 3], 2).unwrap();
        let a = random_hermitian(4, seed);
        let b = random_hermitian(4, seed.wrapping_add(1));
        let ea = tensor_embed(&a, (u, v), &space).unwrap();
        let eb = tensor_embed(&b, (u, v), &space).unwrap();
        let eab = tensor_embed(&a.matmul(&b), (u, v), &space).unwrap();
        prop_assert!(ea.matmul(&eb).max_abs_diff(&eab) <= 1e-12);
    }

    #[test]
    fn embedding_preserves_normalized_trace(seed in any::<u64>(), d in 2usize..=3, u in 0usize..3, v in 0usize..3) {
        prop_assume!(u != v);
        let pair = SiteSpace::new(vec![0, 1], d).unwrap();
        let space = SiteSpace::new(vec![0, 1, 2], d).unwrap();
        let op = random_hermitian(d * d, seed);
        let small = normalized_trace(&op, &pair).unwrap();
        let big = normalized_trace(&tensor_embed(&op, (u, v), &space).unwrap(), &space).unwrap();
        prop_assert!((small - big).norm() <= 1e-12);
    }

    #[test]
    fn embedding_preserves_hermiticity(seed in any::<u64>(), u in 0usize..3, v in 0usize..3) {
        prop_assume!(u != v);
        let space = SiteSpace::new(vec![0, 1, 2], 2).unwrap();
        let e = tensor_embed(&random_hermitian(4, seed), (u, v), &space).unwrap();
        prop_assert!(e.is_hermitian());
    }

    #[test]
    fn eigenvalues_invariant_under_site_permutation(seed in any::<u64>(), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let space = SiteSpace::new(vec![0, 1, 2], 2).unwrap();
        let h = &tensor_embed(&random_hermitian(4, seed), (0, 1), &space).unwrap()
            + &tensor_embed(&random_hermitian(4, seed ^ 7), (1, 2), &space).unwrap();
        let p = site_permutation(3, 2, &perm);
        let conj = p.matmul(&h).matmul(&p.adjoint());
        let a = hermitian_eigenvalues(&h).unwrap();
        let b = hermitian_eigenvalues(&conj).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn eigenvalues_sum_to_trace(seed in any::<u64>(), dim in 1usize..=12) {
        let m = random_hermitian(dim, seed).scale(3.0);
        let eig = hermitian_eigenvalues(&m).unwrap();
        prop_assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        let s: f64 = eig.iter().sum();
        prop_assert!((s - m.trace().re).abs() <= 1e-10 * dim as f64);
        let largest = eig.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        prop_assert!((largest - operator_norm(&m).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn sparse_matches_dense(seed in any::<u64>(), c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
        let space = SiteSpace::new(vec![3, 5, 8], 2).unwrap();
        let a = random_hermitian(4, seed);
        let b = random_hermitian(4, seed ^ 99);
        let sparse = SparseOperator::from_edge_terms(&[(c1, &a, (3, 5)), (c2, &b, (8, 3))], &space).unwrap();
        let dense = &tensor_embed(&a, (3, 5), &space).unwrap().scale(c1)
            + &tensor_embed(&b, (8, 3), &space).unwrap().scale(c2);
        prop_assert!(sparse.to_dense().max_abs_diff(&dense) <= 1e-14);
        let x = random_hermitian(8, seed ^ 5);
        let left = sparse.mul_dense(x.data());
        let want = dense.matmul(&x);
        let err = left.iter().zip(want.data()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-13);
    }
}

#[test]
fn unit_norm_generator() {
    for seed in 0..10 {
        let m = random_hermitian(9, seed);
        assert!(m.is_hermitian());
        assert_relative_eq!(operator_norm(&m).unwrap(), 1.0, epsilon = 1e-12);
    }
}
