use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use unlearn_core::active::{d2d_iterations, recover_hessian};
use unlearn_core::erm::{curvature, gs_erm, rs_erm, rs_erm_root};
use unlearn_core::mechanism::{analytic_epsilon, max_shift, shift_multiplier};
use unlearn_core::median::{gs_median, oracle_rs_median, rs_median};
use unlearn_core::mst::{gs_mst_edge, oracle_rs_mst, rs_mst_edge};
use unlearn_core::{Dataset, LossSpec, PrivacyParams, ScalarSample, WeightedGraph};

fn odd_sample() -> impl Strategy<Value = Vec<f64>> {
    (1usize..40).prop_flat_map(|m| prop::collection::vec(0.0..=1.0f64, 2 * m + 1))
}

fn small_graph() -> impl Strategy<Value = WeightedGraph> {
    (2usize..8)
        .prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            (
                Just(n),
                prop::collection::vec(prop::option::weighted(0.6, 0.0..=1.0f64), pairs),
            )
        })
        .prop_filter_map("connected", |(n, weights)| {
            let mut triples = Vec::new();
            let mut k = 0;
            for u in 0..n {
                for v in (u + 1)..n {
                    if let Some(w) = weights[k] {
                        triples.push((u, v, w));
                    }
                    k += 1;
                }
            }
            WeightedGraph::from_triples(n, &triples, 1.0).ok().filter(|g| g.is_connected())
        })
}

fn points(rows: usize, d: usize) -> impl Strategy<Value = Dataset> {
    (
        prop::collection::vec(-1.0..1.0f64, rows * d),
        prop::collection::vec(prop::bool::ANY, rows),
    )
        .prop_map(move |(xs, ys)| {
            let mut x = DMatrix::from_row_slice(rows, d, &xs);
            for mut row in x.row_iter_mut() {
                let norm = row.norm();
                if norm > 1.0 {
                    row /= norm;
                }
            }
            let y = DVector::from_iterator(rows, ys.into_iter().map(|b| if b { 1.0 } else { -1.0 }));
            Dataset::new(x, y, 1.0, 1.0).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn median_retain_matches_oracle_and_global(values in odd_sample()) {
        let s = ScalarSample::new(values, 1.0).unwrap();
        let rs = rs_median(&s).unwrap().value;
        prop_assert_eq!(rs, oracle_rs_median(&s, 5).unwrap().value);
        prop_assert!(rs <= gs_median(1.0).unwrap().value);
    }

    #[test]
    fn mst_retain_matches_oracle_and_global(g in small_graph()) {
        let rs = rs_mst_edge(&g).unwrap().value;
        prop_assert_eq!(rs, oracle_rs_mst(&g).unwrap().value);
        prop_assert!(rs <= gs_mst_edge(1.0).unwrap().value);
    }

    #[test]
    fn erm_retain_never_exceeds_global(data in points(25, 3), log_lambda in -5.0..1.0f64, logistic in prop::bool::ANY) {
        let lambda = 10f64.powf(log_lambda);
        let loss = if logistic { LossSpec::logistic(lambda) } else { LossSpec::mse(lambda) }.unwrap();
        let report = curvature(&data, &loss).unwrap();
        prop_assert!(report.lambda_r >= lambda);
        let rs = rs_erm(&report, 25).unwrap().value;
        let gs = gs_erm(report.lipschitz, 25, lambda).unwrap().value;
        prop_assert!(rs <= gs);
    }

    #[test]
    fn root_bound_tends_to_linear(lambda_0 in 0.05..2.0f64, l in 0.1..3.0f64, m in 0.0..1.0f64, n in 100usize..100_000) {
        if let Ok(rep) = rs_erm_root(lambda_0, l, m, n) {
            let linear = l / (n as f64 * lambda_0);
            prop_assert!(rep.value >= linear * (1.0 - 1e-12));
            prop_assert!(rep.value <= 2.0 * linear);
        }
    }

    #[test]
    fn hessian_recovery_is_exact(data in points(12, 3), w in prop::collection::vec(-1.0..1.0f64, 3), index in 0usize..12) {
        let loss = LossSpec::logistic(0.01).unwrap();
        let w = DVector::from_vec(w);
        let recovered = recover_hessian(
            &loss.hessian(&data, &w),
            &loss.sample_hessian(&w, &data.row(index), data.label(index)),
            11,
        );
        let direct = loss.hessian(&data.without(index).unwrap(), &w);
        prop_assert!((recovered - direct).abs().max() <= 1e-12);
    }

    #[test]
    fn d2d_steps_reach_the_target(data in points(30, 2), log_lambda in -3.0..0.0f64, log_sigma in -3.0..0.0f64) {
        let params = PrivacyParams::new(1.0, 1e-5).unwrap();
        let sigma = 10f64.powf(log_sigma);
        let report = curvature(&data, &LossSpec::logistic(10f64.powf(log_lambda)).unwrap()).unwrap();
        let count = d2d_iterations(&report, 30, report.lipschitz, sigma, &params).unwrap();
        let target = sigma * shift_multiplier(1.0, 1e-5);
        prop_assert!(count.shift_bound <= target);
        if count.iterations > 0 {
            let one_less = report.gamma_r.powi(count.iterations as i32 - 1) * report.lipschitz / (30.0 * report.lambda_r);
            prop_assert!(one_less > target);
        }
    }

    #[test]
    fn analytic_epsilon_inverts_max_shift(eps in 0.01..1.0f64, log_delta in -10.0..-2.0f64, log_sigma in -2.0..2.0f64) {
        let delta = 10f64.powf(log_delta);
        let sigma = 10f64.powf(log_sigma);
        let p = PrivacyParams::new(eps, delta).unwrap();
        let back = analytic_epsilon(max_shift(&p, sigma).unwrap(), sigma, delta).unwrap();
        prop_assert!((back - eps).abs() <= 1e-9);
    }
}
