mod common;

use boostne::boost::{self, boost_matrix, residual, residual_trace, BoostConfig};
use boostne::connectivity::deepwalk_matrix;
use boostne::nmf::{self, factorize, init_factors, multiplicative_step, FactorPair, NmfConfig};
use boostne::sparse::CsrMatrix;
use common::*;
use ndarray::Array2;
use proptest::prelude::*;

fn dense_objective(r: &CsrMatrix, f: &FactorPair) -> f64 {
    let diff = &r.to_dense() - &naive_matmul(&f.u, &f.v);
    diff.iter().map(|x| x * x).sum()
}

fn pair(u: Array2<f64>, v: Array2<f64>) -> FactorPair {
    FactorPair {
        u,
        v,
        objective: 0.0,
        iterations: 0,
        degenerate: false,
    }
}

#[test]
fn sparse_objective_matches_dense_on_random_8x8() {
    let mut r = rng(17);
    let target = random_sparse(8, 8, 0.4, 3);
    let f = pair(random_nonneg(8, 3, 1.0, &mut r), random_nonneg(3, 8, 1.0, &mut r));
    assert!((nmf::objective(&target, &f).unwrap() - dense_objective(&target, &f)).abs() < 1e-9);
}

#[test]
fn residual_matches_dense_oracle() {
    let mut r = rng(8);
    let target = random_sparse(10, 10, 0.35, 21);
    let f = pair(random_nonneg(10, 2, 0.8, &mut r), random_nonneg(2, 10, 0.8, &mut r));
    let got = residual(&target, &f).unwrap().to_dense();
    let uv = naive_matmul(&f.u, &f.v);
    let dense = target.to_dense();
    for i in 0..10 {
        for j in 0..10 {
            let want = if dense[[i, j]] > 0.0 { (dense[[i, j]] - uv[[i, j]]).max(0.0) } else { 0.0 };
            let want = if want > 1e-12 { want } else { 0.0 };
            assert!((got[[i, j]] - want).abs() < 1e-12);
            assert!(got[[i, j]] <= dense[[i, j]]);
        }
    }
}

#[test]
fn factorization_is_deterministic() {
    let target = random_sparse(30, 30, 0.3, 1);
    let cfg = NmfConfig::with_rank(4).seed(99);
    assert_eq!(factorize(&target, &cfg).unwrap(), factorize(&target, &cfg).unwrap());
}

#[test]
fn boosting_is_deterministic_and_one_level_equals_nmf() {
    let g = random_graph(40, 0.1, false, 2);
    let x = deepwalk_matrix(&g, 5, 1.0).unwrap();
    let cfg = BoostConfig::with_dimension(8, 4).unwrap().seed(5);
    assert_eq!(boost::boostne(&x, &cfg).unwrap(), boost::boostne(&x, &cfg).unwrap());

    let one = BoostConfig::with_dimension(8, 1).unwrap().seed(5);
    let e = boost::boostne(&x, &one).unwrap();
    let f = factorize(x.matrix(), &NmfConfig { rank: 8, seed: 5, ..Default::default() }).unwrap();
    assert_eq!(e.levels[0].factors, f);
    assert_eq!(e.embedding, f.u);
}

#[test]
fn more_levels_do_not_lose_much_on_small_graph() {
    // k=4 vs k=1 at equal total dimension on a 30-node graph, 5% slack.
    for seed in 0..5 {
        let g = random_graph(30, 0.15, false, 100 + seed);
        let x = deepwalk_matrix(&g, 5, 1.0).unwrap();
        let run = |k| {
            let cfg = BoostConfig::with_dimension(8, k).unwrap().seed(seed);
            boost::boostne(&x, &cfg).unwrap().terminal_norm
        };
        let (k4, k1) = (run(4), run(1));
        assert!(k4 <= k1 * 1.05, "seed {seed}: k=4 {k4} vs k=1 {k1}");
    }
}

#[test]
fn joint_objective_is_bounded_by_target_norm() {
    let g = random_graph(50, 0.08, true, 12);
    let x = deepwalk_matrix(&g, 10, 1.0).unwrap();
    let e = boost::boostne(&x, &BoostConfig::with_dimension(12, 3).unwrap()).unwrap();
    let joint = e.joint_objective(x.matrix()).unwrap();
    assert!(joint <= x.matrix().frobenius_sq());
    // the dense joint objective agrees with the sparse identity
    let dense = &x.matrix().to_dense() - &naive_matmul(&e.embedding, &e.context());
    let want: f64 = dense.iter().map(|v| v * v).sum();
    assert!((joint - want).abs() < 1e-8 * want.max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_never_increases_and_factors_stay_nonnegative(
        seed in 0u64..100_000,
        rows in 2usize..20,
        cols in 2usize..20,
        density in 0.05f64..1.0,
        rank in 1usize..5,
    ) {
        let target = random_sparse(rows, cols, density, seed);
        prop_assume!(!target.is_zero());
        let mut r = rng(seed ^ 0x55);
        let mut f = pair(random_nonneg(rows, rank, 2.0, &mut r), random_nonneg(rank, cols, 2.0, &mut r));
        let mut last = nmf::objective(&target, &f).unwrap();
        for _ in 0..10 {
            f = multiplicative_step(&target, &f, 1e-12).unwrap();
            prop_assert!(f.objective <= last + 1e-9, "{} > {}", f.objective, last);
            prop_assert!(f.u.iter().chain(f.v.iter()).all(|&x| x >= 0.0));
            last = f.objective;
        }
    }

    #[test]
    fn sparse_objective_identity(seed in 0u64..100_000, n in 1usize..50, density in 0.0f64..1.0, rank in 1usize..6) {
        let target = random_sparse(n, n, density, seed);
        let mut r = rng(seed + 1);
        let f = pair(random_nonneg(n, rank, 1.5, &mut r), random_nonneg(rank, n, 1.5, &mut r));
        let sparse = nmf::objective(&target, &f).unwrap();
        let dense = dense_objective(&target, &f);
        prop_assert!((sparse - dense).abs() <= 1e-9 * dense.max(1.0), "{sparse} vs {dense}");
    }

    #[test]
    fn residuals_shrink_entrywise(seed in 0u64..100_000, n in 6usize..40, levels in 1usize..5) {
        let g = random_graph(n, 0.15, true, seed);
        let x = deepwalk_matrix(&g, 4, 0.5).unwrap();
        let cfg = BoostConfig { levels, level_rank: 1, seed, allow_wide: true, ..Default::default() };
        let e = boost_matrix(x.matrix(), &cfg).unwrap();
        let trace = residual_trace(&e);
        prop_assert_eq!(trace.len(), levels + 1);
        for w in trace.windows(2) {
            prop_assert!(w[1].frobenius_norm <= w[0].frobenius_norm);
            prop_assert!(w[1].nnz <= w[0].nnz);
        }
        prop_assert!(e.embedding.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn init_scale_formula(seed in 0u64..1000, value in 0.1f64..10.0, rank in 1usize..4) {
        let target = CsrMatrix::from_dense(Array2::from_elem((5, 5), value).view());
        let f = init_factors(&target, &NmfConfig::with_rank(rank).seed(seed)).unwrap();
        let s = (value / rank as f64).sqrt();
        prop_assert!(f.u.iter().chain(f.v.iter()).all(|&x| x > 0.0 && x <= s));
    }
}
