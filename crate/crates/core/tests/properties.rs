use iou_core::bootstrap;
use iou_core::combinatorics::{draw_design, enumerate_tuples};
use iou_core::data::{DataMatrix, Dimensions, Row, TupleIndex};
use iou_core::estimators::{complete_u, incomplete_u};
use iou_core::kernels::{KernelSpec, KernelVariant, TreeParams, TupleSummary};
use iou_core::rng::{derive_stream, RngKey, StreamKind};
use proptest::prelude::*;

fn kernels(r: usize, p: usize) -> Vec<KernelSpec> {
    let design = DataMatrix::new(2, p, (0..2 * p).map(|i| i as f64 * 0.1).collect()).unwrap();
    vec![
        KernelSpec::mean(r, p).unwrap(),
        KernelSpec::coord_max(r, p).unwrap(),
        KernelSpec::new(
            KernelVariant::Kde { design_points: design.clone(), bandwidth: 0.8, statistic: TupleSummary::Max },
            r,
            p,
        )
        .unwrap(),
        KernelSpec::new(
            KernelVariant::SubsampleTree {
                test_points: design,
                params: TreeParams { mtry: 1, min_leaf: 1, max_depth: None },
            },
            r,
            p,
        )
        .unwrap(),
    ]
}

fn rows_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..4, 2usize..6).prop_flat_map(|(p, r)| {
        (
            Just(p),
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, p), r),
            prop::collection::vec(-5.0f64..5.0, r),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_bitwise_symmetric((p, x, y) in rows_strategy(), seed in any::<u64>(), shift in 0usize..6) {
        let r = x.len();
        let rows: Vec<Row<'_>> = x.iter().zip(&y).map(|(f, &z)| Row { features: f, response: Some(z) }).collect();
        let mut rotated = rows.clone();
        rotated.rotate_left(shift % r);
        rotated.swap(0, r - 1);
        let key = RngKey::new(seed, StreamKind::KernelNoise, 1);
        for spec in kernels(r, p) {
            let mut s1 = derive_stream(key);
            let mut s2 = derive_stream(key);
            let noise = spec.is_random();
            let a = spec.eval(&rows, if noise { Some(&mut s1) } else { None }).unwrap();
            let b = spec.eval(&rotated, if noise { Some(&mut s2) } else { None }).unwrap();
            let ab: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(ab, bb);
        }
    }

    #[test]
    fn log_mean_rejects_non_positive_means(x in prop::collection::vec(-10.0f64..0.0, 3)) {
        let spec = KernelSpec::log_mean(3, 1).unwrap();
        let rows: Vec<Row<'_>> = x.iter().map(|v| Row { features: std::slice::from_ref(v), response: None }).collect();
        prop_assert!(spec.eval(&rows, None).is_err());
    }

    #[test]
    fn canonicalize_is_idempotent_and_hash_is_order_free(mut idx in prop::collection::hash_set(0usize..1000, 1..8)
        .prop_map(|s| s.into_iter().collect::<Vec<_>>())) {
        let t = TupleIndex::canonicalize(idx.clone()).unwrap();
        let again = TupleIndex::canonicalize(t.indices().to_vec()).unwrap();
        prop_assert_eq!(&t, &again);
        idx.reverse();
        let rev = TupleIndex::canonicalize(idx).unwrap();
        prop_assert_eq!(t.hash128(), rev.hash128());
    }

    #[test]
    fn designs_are_distinct_sorted_subsets(n in 3usize..40, r in 1usize..4, budget in 1u64..200, seed in any::<u64>()) {
        prop_assume!(r <= n);
        let dims = Dimensions::new(n, r, 1).unwrap();
        let d = draw_design(dims, budget, RngKey::new(seed, StreamKind::Design, 0)).unwrap();
        prop_assert!(d.tuples().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(d.tuples().iter().all(|t| t.order() == r && t.indices()[r - 1] < n));
        if d.p_n() == 1.0 {
            let all = enumerate_tuples(dims, 1 << 20).unwrap();
            prop_assert_eq!(d.tuples(), all.as_slice());
        }
        let again = draw_design(dims, budget, RngKey::new(seed, StreamKind::Design, 0)).unwrap();
        prop_assert_eq!(d.tuples(), again.tuples());
    }

    #[test]
    fn full_budget_reproduces_complete_u(n in 3usize..12, r in 1usize..4, seed in any::<u64>()) {
        prop_assume!(r <= n);
        let mut s = derive_stream(RngKey::new(seed, StreamKind::Simulation, 0));
        let data = DataMatrix::new(n, 2, (0..2 * n).map(|_| s.normal()).collect()).unwrap();
        let dims = Dimensions::new(n, r, 2).unwrap();
        let key = RngKey::new(seed, StreamKind::KernelNoise, 0);
        for spec in [KernelSpec::mean(r, 2).unwrap(), KernelSpec::coord_max(r, 2).unwrap()] {
            let full = complete_u(&data, &spec, dims, key, 1 << 20).unwrap();
            let design = draw_design(dims, 1 << 20, RngKey::new(seed, StreamKind::Design, 0)).unwrap();
            let inc = incomplete_u(&data, &spec, &design, key).unwrap();
            prop_assert_eq!(full, inc.u_prime);
        }
    }

    #[test]
    fn complete_u_permutation_invariance(n in 3usize..10, seed in any::<u64>()) {
        let mut s = derive_stream(RngKey::new(seed, StreamKind::Simulation, 0));
        let data = DataMatrix::new(n, 1, (0..n).map(|_| s.normal()).collect()).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left((seed % n as u64) as usize);
        let perm = data.permute_rows(&order).unwrap();
        let dims = Dimensions::new(n, 2, 1).unwrap();
        let key = RngKey::new(0, StreamKind::KernelNoise, 0);
        let spec = KernelSpec::coord_max(2, 1).unwrap();
        let a = complete_u(&data, &spec, dims, key, 1000).unwrap();
        let b = complete_u(&perm, &spec, dims, key, 1000).unwrap();
        prop_assert!((a[0] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn quantile_is_monotone_in_alpha(stats in prop::collection::vec(0.0f64..100.0, 1..200), a in 0.001f64..0.999, b in 0.001f64..0.999) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let q_lo = bootstrap::quantile(&stats, lo).unwrap();
        let q_hi = bootstrap::quantile(&stats, hi).unwrap();
        prop_assert!(q_hi <= q_lo);
        prop_assert!(stats.contains(&q_lo));
    }
}
