mod common;

use bamg::coarsen::weighted_coloring_mis;
use bamg::interp::{ls_fit_set, select_interpolatory_set, PenaltyScale};
use bamg::prelude::*;
use bamg::sparse::galerkin_product;
use bamg::strength::FitTarget;
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tvs<R: Rng>(n: usize, k: usize, rng: &mut R) -> TestVectorSet {
    let vectors: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..2.0)).collect();
    TestVectorSet::new(vectors, weights, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn galerkin_equals_dense_triple_product(seed in any::<u64>(), n in 1usize..=30, nc_frac in 0.1f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_spd(n, &mut rng);
        let nc = ((n as f64 * nc_frac).ceil() as usize).clamp(1, n);
        let p = CsrMatrix::from_dense(&random_dense(n, nc, 0.3, &mut rng)).unwrap();
        let ac = galerkin_product(&a, &p).unwrap();
        let pd = p.to_dense();
        let expect = dense_matmul(&dense_matmul(&dense_transpose(&pd), &a.to_dense()), &pd);
        prop_assert_eq!(ac.n_rows(), nc);
        prop_assert!(max_abs_diff(&ac.to_dense(), &expect) <= 1e-12 * (1.0 + n as f64));
    }

    #[test]
    fn ls_fit_matches_qr(seed in any::<u64>(), n in 4usize..=20, k in 2usize..=10, size in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_spd(n, &mut rng);
        let tvs = random_tvs(n, k, &mut rng);
        let ctx = LsContext::with_target(&tvs, &a, FitTarget::ResidualCorrected).unwrap();
        let i = rng.gen_range(0..n);
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        for s in 0..others.len() {
            let t = rng.gen_range(s..others.len());
            others.swap(s, t);
        }
        let mut set: Vec<usize> = others.into_iter().take(size.min(k)).collect();
        set.sort_unstable();
        let (p, ls) = ls_fit_set(&ctx, i, &set).unwrap();
        let t = dense_targets(&a.to_dense(), tvs.vectors(), i);
        let (q, oracle) = weighted_fit(tvs.vectors(), tvs.weights(), &t, &set);
        let scale = 1.0 + tvs.weights().iter().zip(&t).map(|(w, t)| w * t * t).sum::<f64>();
        prop_assert!((ls - oracle).abs() <= 1e-10 * scale, "ls {} vs {}", ls, oracle);
        if set.len() < k {
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn coloring_is_independent_and_maximal(seed in any::<u64>(), n in 1usize..=12, p in 0.05f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_strength_graph(n, p, &mut rng);
        let candidates: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
        let set = weighted_coloring_mis(&g, &candidates);
        prop_assert!(independent_and_maximal(&g, &candidates, &set));
    }
}

#[test]
fn selection_matches_exhaustive_search_on_small_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut rows = 0;
    for _ in 0..6 {
        let n = rng.gen_range(4..=8);
        let alpha = rng.gen_range(-1.5..1.5);
        let epsilon = [1.0, 0.1, 1e-3][rng.gen_range(0..3)];
        let a = assemble_matrix(&ProblemSpec::new(n, alpha, epsilon).unwrap()).unwrap();
        let tvs = generate_test_vectors(&a, 8, 10, rng.gen(), WeightScheme::InverseRayleigh).unwrap();
        let ctx = LsContext::new(&tvs, &a).unwrap();
        let coarse: Vec<usize> = (0..n * n).filter(|_| rng.gen_bool(0.3)).collect();
        let split = CfSplit::from_coarse(n * n, &coarse).unwrap();
        let params = InterpSearchParams {
            caliber: 3,
            search_depth: 2,
            gamma: 1.5,
            max_candidates: usize::MAX,
            penalty_scale: PenaltyScale::CorrectionEnergy,
        };
        let dense = a.to_dense();
        let is_coarse: Vec<bool> = (0..n * n).map(|i| split.is_coarse(i)).collect();
        for &i in split.fine() {
            let fit = select_interpolatory_set(&ctx, &a, &split, i, &params).unwrap();
            let (set, ls) = exhaustive_selection(&dense, tvs.vectors(), tvs.weights(), &is_coarse, i, 2, 3, 1.5);
            let same = fit.set == set || (fit.set.len() == set.len() && (fit.ls_value - ls).abs() <= 1e-12 * ls.max(1e-300));
            assert!(same, "row {i}: got {:?} ({}), exhaustive {:?} ({})", fit.set, fit.ls_value, set, ls);
            rows += 1;
        }
    }
    assert!(rows > 50);
}
