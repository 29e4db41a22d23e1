//! Property tests over random snapshots and null contexts.

use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

use sparse_doa::detector::{DetectOptions, Detector};
use sparse_doa::lasso_path::{general_knots, lasso_kkt_violation, orthogonal_knots};
use sparse_doa::montecarlo::{run_experiment, table_config};
use sparse_doa::signal_model::{build_array_model, ArrayConfig, GridMode};
use sparse_doa::stat_tests::{stat_a, stat_b, stat_c, stat_cov, NoiseLevel, NullContext, TestKind};
use sparse_doa::thresholds::threshold;

fn snapshot(m: usize) -> impl Strategy<Value = DVector<Complex64>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), m)
        .prop_filter("nonzero", |v| v.iter().any(|(re, im)| re.abs() + im.abs() > 1e-3))
        .prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|(re, im)| Complex64::new(re, im))))
}

fn sized_snapshot() -> impl Strategy<Value = (usize, DVector<Complex64>)> {
    (2usize..=12).prop_flat_map(|m| (Just(m), snapshot(m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn general_path_matches_closed_form((m, b) in sized_snapshot()) {
        let model = build_array_model(&ArrayConfig::new(m, m), GridMode::Orthogonal).unwrap();
        let closed = orthogonal_knots(&model, &b).unwrap();
        let general = general_knots(&model, &b, m).unwrap();
        prop_assert_eq!(closed.entry_order(), general.entry_order());
        for (c, g) in closed.taus().iter().zip(general.taus()) {
            prop_assert!((c - g).abs() < 1e-8, "tau {} vs {}", c, g);
        }
    }

    #[test]
    fn knot_solutions_satisfy_kkt(b in snapshot(8)) {
        let model = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled).unwrap();
        let path = general_knots(&model, &b, 6).unwrap();
        let scale = path.knots[0].tau;
        for k in &path.knots {
            prop_assert!(lasso_kkt_violation(&model, &b, &k.solution, k.tau) <= 1e-7 * scale);
        }
        for w in path.knots.windows(2) {
            prop_assert!(w[1].tau <= w[0].tau + 1e-12 * scale);
        }
    }

    #[test]
    fn statistics_are_scale_invariant(b in snapshot(8), c in 0.01f64..100.0, sigma2 in 0.01f64..10.0) {
        let model = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap();
        let t1 = orthogonal_knots(&model, &b).unwrap().taus();
        let bc = &b * Complex64::from(c);
        let t2 = orthogonal_knots(&model, &bc).unwrap().taus();
        let n1 = NoiseLevel::from_variance(sigma2).unwrap();
        let n2 = NoiseLevel::from_variance(sigma2 * c * c).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
        for k in 1..=8 {
            prop_assert!(close(stat_a(&t1, k, n1).unwrap(), stat_a(&t2, k, n2).unwrap()));
            prop_assert!(close(stat_b(&t1, k, n1).unwrap(), stat_b(&t2, k, n2).unwrap()));
            prop_assert!(close(stat_cov(&t1, k, n1).unwrap(), stat_cov(&t2, k, n2).unwrap()));
            let (s1, s2) = (t1[7] * t1[7], t2[7] * t2[7]);
            if s1 > 1e-12 {
                prop_assert!(close(stat_c(&t1, k, s1).unwrap(), stat_c(&t2, k, s2).unwrap()));
            }
        }
    }

    #[test]
    fn threshold_round_trip(
        test in prop::sample::select(vec![TestKind::CovExact, TestKind::CovAsymptotic, TestKind::A, TestKind::B, TestKind::C]),
        n in 1usize..=16,
        pc in 0.5f64..0.999,
    ) {
        let ctx = NullContext::count(n);
        let eta = threshold(test, &ctx, pc).unwrap();
        prop_assert!((test.cdf(eta, &ctx).unwrap() - pc).abs() <= 1e-9);
    }

    #[test]
    fn cdfs_are_monotone(
        test in prop::sample::select(vec![TestKind::CovExact, TestKind::CovAsymptotic, TestKind::A, TestKind::B, TestKind::C]),
        n in 1usize..=12,
        a in 0.0f64..40.0,
        d in 0.0f64..40.0,
    ) {
        let ctx = NullContext::count(n);
        let (lo, hi) = (test.cdf(a, &ctx).unwrap(), test.cdf(a + d, &ctx).unwrap());
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn detection_result_is_consistent(b in snapshot(8), test in prop::sample::select(vec![TestKind::A, TestKind::B, TestKind::CovExact])) {
        let model = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap();
        let opts = DetectOptions::new(test, 0.99).with_noise(NoiseLevel::from_variance(0.05).unwrap());
        let r = Detector::new(model.clone(), opts).unwrap().detect(&b).unwrap();
        prop_assert_eq!(r.support.len(), r.s_hat);
        prop_assert!(r.trace.len() <= 8);
        for (k, angle) in r.support.iter().zip(&r.angles) {
            prop_assert_eq!(model.grid()[*k], *angle);
        }
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let cfg = table_config(4, 200, 9).unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.pc_hat, x.pf_hat, x.pm_hat, x.pb_hat), (y.pc_hat, y.pf_hat, y.pm_hat, y.pb_hat));
    }
}
