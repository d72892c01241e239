mod common;

use common::*;
use proptest::prelude::*;
use tsp_aqm::generator::{build_generator, check_balance_residual};
use tsp_aqm::metrics::{
    self, delay_nrt, delay_rt, effective_nrt_rate, loss_probability_rt, mean_queue_nrt,
    mean_queue_rt, nrt_only_oracle, rt_marginal, rt_marginal_oracle, QoSReport,
};
use tsp_aqm::solver::{
    residual_inf_norm, solve_stationary_direct, solve_stationary_iterative, StationaryDistribution,
};
use tsp_aqm::{FeedbackPolicy, ModelParams, RawParams};

fn solve(p: &ModelParams) -> StationaryDistribution {
    solve_stationary_direct(&build_generator(p)).unwrap()
}

#[test]
fn generator_matches_dense_restatement() {
    for p in [
        tiny_instance(),
        canonical(20.0, FeedbackPolicy::Linear),
        canonical(5.0, FeedbackPolicy::ConstantFraction(0.25)),
    ] {
        let dense = dense_generator(&p);
        let q = build_generator(&p);
        for (n, dense_row) in dense.iter().enumerate() {
            let mut row = vec![0.0; dense.len()];
            for (c, r) in q.row(n) {
                row[c] = r;
            }
            row[n] = q.diagonal(n);
            assert!(max_abs_diff(&row, dense_row) < 1e-12, "row {n}");
        }
    }
}

#[test]
fn tiny_instance_against_dense_and_exact() {
    let p = tiny_instance();
    let direct = solve(&p);
    let dense = dense_null_space_solve(&dense_generator(&p));
    assert!(max_abs_diff(direct.probabilities(), &dense) <= 1e-12);
    assert!(max_abs_diff(direct.probabilities(), &tiny_exact::PI) <= 1e-12);

    let q = QoSReport::compute(&direct, &p).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    assert!(close(q.p_lrt, tiny_exact::P_LRT));
    assert!(close(q.n_rt, tiny_exact::N_RT));
    assert!(close(q.n_nrt, tiny_exact::N_NRT));
    assert!(close(q.lambda_eff_nrt, tiny_exact::LAMBDA_EFF));
    assert!(close(q.d_rt, tiny_exact::D_RT));
    assert!(close(q.d_nrt_paper, tiny_exact::D_NRT_PAPER));
    assert!(close(q.d_nrt_little, tiny_exact::D_NRT_LITTLE));

    let report =
        check_balance_residual(&p, &StationaryDistribution::from_probabilities(dense)).unwrap();
    assert!(report.max_residual <= 1e-12);
}

#[test]
fn residual_tracks_componentwise_error() {
    let p = tiny_instance();
    let gen = build_generator(&p);
    let exact = StationaryDistribution::from_probabilities(tiny_exact::PI.to_vec());
    assert!(residual_inf_norm(&gen, &exact).unwrap() < 1e-15);
    // A perturbation of size eps moves the residual by at most eps * max outflow * 2.
    let eps = 1e-6;
    let mut v = tiny_exact::PI.to_vec();
    v[3] += eps;
    let residual = residual_inf_norm(&gen, &StationaryDistribution::from_probabilities(v)).unwrap();
    assert!(residual > 0.5 * eps && residual <= 2.0 * gen.max_outflow() * eps);
}

#[test]
fn point_mass_residual() {
    let p = canonical(20.0, FeedbackPolicy::Linear);
    let mut v = vec![0.0; p.state_space().size()];
    v[0] = 1.0;
    let r = residual_inf_norm(
        &build_generator(&p),
        &StationaryDistribution::from_probabilities(v),
    )
    .unwrap();
    assert!(r >= p.lambda_rt());
}

#[test]
fn rt_only_model() {
    // lambda1 = 0, R = 1, lambda = mu: restricted chain is two-state.
    let raw = RawParams {
        capacity_n: 4,
        threshold_r: 1,
        threshold_l: 2,
        lambda_rt: 2.0,
        lambda_nrt: 0.0,
        mu_rt: 2.0,
        mu_nrt: 3.0,
        feedback: FeedbackPolicy::Linear,
    };
    let p = raw.validate().unwrap();
    let d = solve(&p);
    let probs = d.probabilities();
    assert!((probs[0] - 0.5).abs() < 1e-15 && (probs[4] - 0.5).abs() < 1e-15);
    assert!(probs
        .iter()
        .enumerate()
        .all(|(n, &x)| n % 4 == 0 || x == 0.0));
    assert_eq!(mean_queue_nrt(&d, &p).unwrap(), 0.0);
    assert_eq!(effective_nrt_rate(&d, &p).unwrap(), 0.0);

    let it = solve_stationary_iterative(&build_generator(&p), 1e-13, 1_000_000).unwrap();
    assert!((it.probabilities()[0] - 0.5).abs() < 1e-10);

    // Canonical, lambda1 = 0: uniform RT marginal and unchanged N_RT.
    let p0 = canonical(0.0, FeedbackPolicy::Linear);
    let d0 = solve(&p0);
    let m = rt_marginal(&d0, &p0).unwrap();
    assert!(m.iter().all(|x| (x - 1.0 / 31.0).abs() < 1e-12));
    let p20 = canonical(20.0, FeedbackPolicy::Linear);
    let n_rt_0 = mean_queue_rt(&d0, &p0).unwrap();
    let n_rt_20 = mean_queue_rt(&solve(&p20), &p20).unwrap();
    assert!((n_rt_0 - 15.0).abs() < 1e-9 && (n_rt_0 - n_rt_20).abs() < 1e-9);
}

#[test]
fn rho_one_closed_forms() {
    let p = canonical(20.0, FeedbackPolicy::Linear);
    let d = solve(&p);
    assert!((loss_probability_rt(&d, &p).unwrap() - 1.0 / 31.0).abs() < 1e-10);
    assert!((delay_rt(&d, &p).unwrap() - 31.0 / 60.0).abs() < 1e-9);

    let raw = RawParams {
        lambda_rt: 1.0,
        mu_rt: 1.0,
        ..tiny_instance().raw()
    };
    let p = raw.validate().unwrap();
    assert!((delay_rt(&solve(&p), &p).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn light_rt_load_has_negligible_loss() {
    let raw = RawParams {
        lambda_rt: 1.0,
        mu_rt: 1000.0,
        ..RawParams::canonical(20.0, FeedbackPolicy::Linear)
    };
    let p = raw.validate().unwrap();
    assert!(loss_probability_rt(&solve(&p), &p).unwrap() < 1e-10);
}

#[test]
fn nrt_only_product_form() {
    for policy in [
        FeedbackPolicy::Linear,
        FeedbackPolicy::ConstantFraction(0.5),
    ] {
        for lambda1 in [5.0, 20.0, 35.0, 60.0] {
            let raw = RawParams {
                lambda_rt: 1e-9,
                ..RawParams::canonical(lambda1, policy)
            };
            let p = raw.validate().unwrap();
            let d = solve(&p);
            let row0 = &d.probabilities()[..=p.threshold_h()];
            let oracle = nrt_only_oracle(&p);
            assert!(max_abs_diff(row0, &oracle) < 1e-8, "{policy} {lambda1}");
            assert!(max_abs_diff(&oracle, &birth_death(&p)) < 1e-12);

            // Both NRT delay formulas collapse at lambda -> 0.
            let (combined, little) = delay_nrt(&d, &p).unwrap();
            let mean: f64 = oracle.iter().enumerate().map(|(j, x)| j as f64 * x).sum();
            let lambda_eff: f64 = oracle
                .iter()
                .enumerate()
                .map(|(j, x)| p.nrt_rate(j) * x)
                .sum();
            assert!((little - mean / lambda_eff).abs() < 1e-6 * little);
            assert!((combined - little).abs() < 1e-8);
        }
    }
}

#[test]
fn light_traffic_limits() {
    let raw = RawParams {
        lambda_rt: 1e-9,
        lambda_nrt: 1e-4,
        ..RawParams::canonical(1.0, FeedbackPolicy::Linear)
    };
    let p = raw.validate().unwrap();
    let d = solve(&p);
    let (combined, little) = delay_nrt(&d, &p).unwrap();
    let service = 1.0 / p.mu_nrt();
    assert!((combined - service).abs() < 0.01 * service);
    assert!((little - service).abs() < 0.01 * service);
    let lambda_eff = effective_nrt_rate(&d, &p).unwrap();
    assert!((lambda_eff - 1e-4).abs() < 0.01 * 1e-4);
}

#[test]
fn combined_delay_exceeds_little_delay_with_rt_traffic() {
    let p = canonical(15.0, FeedbackPolicy::Linear);
    let (combined, little) = delay_nrt(&solve(&p), &p).unwrap();
    assert!(combined > little);
}

#[test]
fn backends_agree_on_canonical() {
    let p = canonical(20.0, FeedbackPolicy::Linear);
    let gen = build_generator(&p);
    let direct = solve_stationary_direct(&gen).unwrap();
    let iterative = solve_stationary_iterative(&gen, 1e-12, 2_000_000).unwrap();
    assert!(direct.max_abs_diff(&iterative) <= 1e-9);
    assert!(iterative.iterations() > 1);
}

#[test]
fn nrt_queue_monotone_in_lambda1() {
    for policy in [
        FeedbackPolicy::Linear,
        FeedbackPolicy::ConstantFraction(0.5),
        FeedbackPolicy::ConstantFraction(0.25),
    ] {
        let mut last = 0.0;
        for step in 0..=12 {
            let lambda1 = 5.0 + 2.5 * step as f64;
            let p = canonical(lambda1, policy);
            let n_nrt = mean_queue_nrt(&solve(&p), &p).unwrap();
            assert!(n_nrt >= last, "{policy}: n_nrt fell at lambda1={lambda1}");
            last = n_nrt;
        }
    }
}

fn small_model() -> impl Strategy<Value = ModelParams> {
    (
        1usize..5,
        1usize..4,
        1usize..6,
        0.2f64..3.0,
        0.0f64..4.0,
        0.2f64..3.0,
        0.2f64..3.0,
        prop_oneof![
            Just(FeedbackPolicy::Linear),
            (0.05f64..=1.0).prop_map(FeedbackPolicy::ConstantFraction)
        ],
    )
        .prop_map(|(r, gl, gh, lam, lam1, mu, mu1, policy)| {
            let l = r + gl;
            RawParams {
                capacity_n: l + gh + r,
                threshold_r: r,
                threshold_l: l,
                lambda_rt: lam,
                lambda_nrt: lam1,
                mu_rt: mu,
                mu_nrt: mu1,
                feedback: policy,
            }
            .validate()
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rt_marginal_is_mm1k(p in small_model()) {
        let d = solve(&p);
        let m = rt_marginal(&d, &p).unwrap();
        let oracle = rt_marginal_oracle(p.threshold_r(), p.lambda_rt(), p.mu_rt());
        prop_assert!(max_abs_diff(&m, &oracle) < 1e-10);
        prop_assert!(max_abs_diff(&oracle, &mm1k(p.threshold_r(), p.lambda_rt(), p.mu_rt())) < 1e-12);
    }

    #[test]
    fn distribution_is_valid_and_balanced(p in small_model()) {
        let d = solve(&p);
        prop_assert!(d.probabilities().iter().all(|&x| x >= 0.0));
        prop_assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.residual_inf() <= 1e-10);
        let report = check_balance_residual(&p, &d).unwrap();
        prop_assert!(report.max_residual <= 1e-10);

        let dense = dense_null_space_solve(&dense_generator(&p));
        if p.lambda_nrt() > 0.0 {
            prop_assert!(max_abs_diff(d.probabilities(), &dense) < 1e-10);
        }
    }

    #[test]
    fn nrt_flow_conservation(p in small_model()) {
        let d = solve(&p);
        let served: f64 = (1..=p.threshold_h()).map(|j| d.probabilities()[j]).sum::<f64>() * p.mu_nrt();
        let admitted = effective_nrt_rate(&d, &p).unwrap();
        prop_assert!((admitted - served).abs() <= 1e-10 * p.mu_nrt());
    }

    #[test]
    fn report_bounds(p in small_model()) {
        prop_assume!(p.lambda_nrt() > 0.0);
        let d = solve(&p);
        let q = QoSReport::compute(&d, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&q.p_lrt));
        prop_assert!(q.n_rt >= 0.0 && q.n_rt <= p.threshold_r() as f64);
        prop_assert!(q.n_nrt >= 0.0 && q.n_nrt <= p.threshold_h() as f64);
        prop_assert!(q.lambda_eff_nrt >= 0.0 && q.lambda_eff_nrt <= p.lambda_nrt() * (1.0 + 1e-12));
        prop_assert!(q.d_nrt_paper >= q.d_nrt_little);
    }

    #[test]
    fn backends_agree(p in small_model()) {
        prop_assume!(p.lambda_nrt() > 0.0);
        let gen = build_generator(&p);
        let direct = solve_stationary_direct(&gen).unwrap();
        let tol = 1e-12;
        let it = solve_stationary_iterative(&gen, tol, 5_000_000).unwrap();
        prop_assert!(direct.max_abs_diff(&it) <= f64::max(1e-8, 10.0 * tol));
    }
}

#[test]
fn rt_statistics_invariant_across_policies_and_rates() {
    let reference = canonical(5.0, FeedbackPolicy::Linear);
    let base = metrics::QoSReport::compute(&solve(&reference), &reference).unwrap();
    for policy in [
        FeedbackPolicy::Linear,
        FeedbackPolicy::ConstantFraction(0.5),
    ] {
        for lambda1 in [5.0, 15.0, 20.0, 35.0] {
            let p = canonical(lambda1, policy);
            let q = QoSReport::compute(&solve(&p), &p).unwrap();
            assert!((q.p_lrt - base.p_lrt).abs() < 1e-9);
            assert!((q.n_rt - base.n_rt).abs() < 1e-9);
            assert!((q.d_rt - base.d_rt).abs() < 1e-9);
        }
    }
}
