use std::collections::HashSet;

use koopman_core::accuracy::mode_error_from_values;
use koopman_core::*;
use proptest::prelude::*;

fn edmd_fixture() -> (KoopmanDecomposition, SnapshotSet) {
    let train = gen_polymap(100, 1, 0.9, 0.8).unwrap();
    let test = gen_polymap(100, 2, 0.9, 0.8).unwrap();
    let dict = monomial_dictionary(2, MonomialSpec::PerCoordinateMax(3)).unwrap();
    (edmd(&train, &dict, Rank::Auto).unwrap(), test)
}

fn analytic_values(pair: &AnalyticEigenpair, states: MatRef<'_, f64>) -> Vec<c64> {
    (0..states.ncols())
        .map(|k| c64::new(pair.eval(&[states[(0, k)], states[(1, k)]]), 0.0))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_pairs_satisfy_the_koopman_equation(seed in any::<u64>(), k in 0u32..6, l in 0u32..6) {
        let map = PolyMap::default();
        let pair = map
            .analytic_eigenpairs(5, 5)
            .into_iter()
            .find(|p| p.k == k && p.l == l)
            .unwrap();
        let data = map.sample(1000, seed).unwrap();
        for j in 0..data.len() {
            let x = [data.inputs()[(0, j)], data.inputs()[(1, j)]];
            let y = map.apply(x);
            prop_assert_eq!(y, [data.images()[(0, j)], data.images()[(1, j)]]);
            let lhs = pair.eval(&y);
            let rhs = pair.eigenvalue * pair.eval(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn alpha_vanishes_for_analytic_pairs(seed in any::<u64>(), k in 0u32..4, l in 0u32..4) {
        let map = PolyMap::default();
        let pair = map.analytic_eigenpairs(3, 3).into_iter().find(|p| p.k == k && p.l == l).unwrap();
        let test = map.sample(100, seed).unwrap();
        let a = analytic_values(&pair, test.inputs());
        let b = analytic_values(&pair, test.images());
        let mu = c64::new(pair.eigenvalue, 0.0);
        for norm in [NormVariant::AbsSum, NormVariant::L2] {
            prop_assert!(mode_error_from_values(0, mu, &a, &b, norm).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn alpha_of_shifted_eigenvalue_is_the_shift(
        seed in any::<u64>(),
        re in -0.1f64..0.1,
        im in -0.1f64..0.1,
    ) {
        let map = PolyMap::default();
        let pair = map.analytic_eigenpairs(1, 1).into_iter().find(|p| (p.k, p.l) == (1, 1)).unwrap();
        let test = map.sample(100, seed).unwrap();
        let a = analytic_values(&pair, test.inputs());
        let b = analytic_values(&pair, test.images());
        let delta = c64::new(re, im);
        let alpha = mode_error_from_values(0, c64::new(pair.eigenvalue, 0.0) + delta, &a, &b, NormVariant::AbsSum).unwrap();
        prop_assert!((alpha - delta.norm()).abs() <= 1e-12);
    }

    #[test]
    fn alpha_ignores_eigenfunction_scale(mag in 1e-6f64..1e6, phase in -3.2f64..3.2) {
        let (dec, test) = edmd_fixture();
        let before = mode_errors(&dec, &test, NormVariant::AbsSum).unwrap();
        let mut scaled = dec.clone();
        for i in 0..scaled.rank {
            scaled.rescale_eigenfunction(i, c64::from_polar(mag, phase)).unwrap();
        }
        let after = mode_errors(&scaled, &test, NormVariant::AbsSum).unwrap();
        for (a, b) in before.iter().zip(&after) {
            let (a, b) = (*a.as_ref().unwrap(), *b.as_ref().unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
    }

    #[test]
    fn random_splits_are_disjoint(seed in any::<u64>(), n_train in 1usize..40, n_test in 1usize..40) {
        let set = gen_polymap(80, 3, 0.9, 0.8).unwrap();
        let (train, test) = set.split(n_train, n_test, SplitStrategy::Random { seed }).unwrap();
        prop_assert_eq!(train.len(), n_train);
        prop_assert_eq!(test.len(), n_test);
        let key = |s: &SnapshotSet, k: usize| (s.inputs()[(0, k)].to_bits(), s.inputs()[(1, k)].to_bits());
        let seen: HashSet<_> = (0..train.len()).map(|k| key(&train, k)).collect();
        for k in 0..test.len() {
            prop_assert!(!seen.contains(&key(&test, k)));
        }
    }

    #[test]
    fn kernels_are_symmetric(seed in any::<u64>()) {
        let a = gen_polymap(1000, seed, 0.9, 0.8).unwrap();
        let kernels = [
            Kernel::Polynomial { degree: 5 },
            Kernel::Exponential,
            Kernel::Gaussian { sigma: 0.7 },
            Kernel::Laplacian { sigma: 1.3 },
        ];
        for kernel in kernels {
            for j in 0..a.len() {
                let x = [a.inputs()[(0, j)], a.inputs()[(1, j)]];
                let y = [a.images()[(0, j)], a.images()[(1, j)]];
                let (kxy, kyx) = (kernel.eval(&x, &y).unwrap(), kernel.eval(&y, &x).unwrap());
                prop_assert!((kxy - kyx).abs() <= 1e-12 * kxy.abs().max(1.0));
            }
        }
    }

    #[test]
    fn continuous_conversion_inverts_the_exponential(re in -5.0f64..5.0, im in -3.1f64..3.1, dt in 0.01f64..2.0) {
        let lambda = c64::new(re, im / dt);
        let mu = (lambda * dt).exp();
        let back = to_continuous(mu, dt).unwrap().lambda();
        prop_assert!((back - lambda).norm() <= 1e-9 * (1.0 + lambda.norm()));
    }

    #[test]
    fn spearman_is_invariant_to_monotone_maps(values in prop::collection::vec(-1e3f64..1e3, 3..40)) {
        let other: Vec<f64> = values.iter().enumerate().map(|(i, v)| v.sin() + i as f64 * 0.01).collect();
        let Ok(base) = rank_correlation(&values, &other) else { return Ok(()); };
        let mapped: Vec<f64> = values.iter().map(|v| v.exp().min(f64::MAX)).collect();
        if let Ok(rho) = rank_correlation(&mapped, &other) {
            let distinct: HashSet<u64> = mapped.iter().map(|v| v.to_bits()).collect();
            let original: HashSet<u64> = values.iter().map(|v| v.to_bits()).collect();
            if distinct.len() == original.len() {
                prop_assert!((rho - base).abs() < 1e-12);
            }
        }
        prop_assert!((-1.0..=1.0).contains(&base));
    }
}

#[test]
fn zero_denominator_is_a_degenerate_eigenfunction() {
    // DMD eigenfunctions are linear, so they vanish on data at the origin.
    let dec = dmd(&gen_polymap(40, 5, 0.9, 0.8).unwrap(), Rank::Auto).unwrap();
    let zeros = Mat::<f64>::zeros(2, 5);
    let origin = SnapshotSet::new(zeros.clone(), zeros).unwrap();
    for norm in [NormVariant::AbsSum, NormVariant::L2] {
        for i in 0..dec.rank {
            assert!(matches!(
                mode_error(&dec, i, &origin, norm),
                Err(KoopmanError::DegenerateEigenfunction { index }) if index == i
            ));
        }
    }
    let report = assemble_report(&dec, &origin, &ReportOptions::default()).unwrap();
    assert!(report.records.iter().all(|r| r.alpha.is_none() && !r.issues.is_empty()));
    assert_eq!(report.metadata.warnings.len(), dec.rank);
}

#[test]
fn empty_test_set_is_rejected() {
    let (dec, test) = edmd_fixture();
    let (_, empty) = test.split(100, 0, SplitStrategy::Prefix).unwrap();
    assert!(matches!(mode_error(&dec, 0, &empty, NormVariant::AbsSum), Err(KoopmanError::Size(_))));
}
