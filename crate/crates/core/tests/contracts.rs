//! End-to-end contracts exercised purely through the public API: descent
//! certificates on real runs, budget accounting, and agreement between the
//! subgradient prox solver and the brute-force oracle.

use hippa_core::{
    boosted_hippa_run, brute_force_envelope, brute_force_prox, hippa_run,
    iteration_bound_certificate, lyapunov_values, solve_prox_sgdss, telescoped_bound_certificate,
    ClosedFormInner, EnvelopeParams, ErrorSchedule, FnOracle, GridSpec, InnerBudgetSchedule,
    Point, SgdssInner, SgdssSchedule, SpectralConfig, StopReason, StoppingRule,
};

fn abs_oracle() -> FnOracle {
    FnOracle::new(
        1,
        |x| (x[0] - 2.0).abs(),
        |x| vec![if x[0] == 2.0 { 0.0 } else { (x[0] - 2.0).signum() }],
    )
    .with_lower_bound(0.0)
}

fn double_well_oracle() -> FnOracle {
    FnOracle::new(
        1,
        |x| x[0].powi(4) - x[0] * x[0],
        |x| vec![4.0 * x[0].powi(3) - 2.0 * x[0]],
    )
    .with_lower_bound(-0.25)
}

#[test]
fn hippa_sgdss_run_satisfies_certificates() {
    let f = abs_oracle();
    let params = EnvelopeParams::new(2.0, 1.0).unwrap();
    let schedule = ErrorSchedule::default();
    let stop = StoppingRule::by_outer_iterations(12).with_residual_tol(1e-3);
    let result = hippa_run(
        &Point::scalar(4.0).unwrap(),
        &f,
        &params,
        &schedule,
        &InnerBudgetSchedule::default(),
        &stop,
        &SgdssInner::default(),
        None,
    )
    .expect("run succeeds");

    assert!(
        matches!(
            result.stop_reason,
            StopReason::ResidualTolerance | StopReason::OuterIterationBudget
        ),
        "unexpected stop reason {:?}",
        result.stop_reason
    );
    assert!(
        (result.point.coord(0) - 2.0).abs() <= 5e-2,
        "final iterate {} too far from the minimizer",
        result.point.coord(0)
    );

    let lyapunov = lyapunov_values(&result.trace, &schedule);
    for w in lyapunov.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "Lyapunov sequence increased: {} -> {}", w[0], w[1]);
    }
    let tele = telescoped_bound_certificate(&result.trace, &params, &schedule, 0.0)
        .expect("non-empty trace");
    assert!(tele.satisfied, "telescoped bound violated: {} > {}", tele.lhs, tele.rhs);
    let iter_cert = iteration_bound_certificate(&result.trace, &params, &schedule, 1e-3, 0.0)
        .expect("non-empty trace");
    assert!(iter_cert.satisfied, "iteration bound violated: {iter_cert:?}");

    // Every record's inexact envelope over-approximates the true envelope,
    // which in turn dominates inf f = 0.
    for rec in &result.trace {
        assert!(rec.envelope_value_inexact >= 0.0, "envelope undercut inf f at k={}", rec.k);
        assert_eq!(rec.epsilon, schedule.epsilon_at(rec.k), "wrong ε stamped at k={}", rec.k);
    }
}

#[test]
fn subgradient_call_budget_is_exact() {
    let f = abs_oracle();
    let params = EnvelopeParams::new(2.0, 1.0).unwrap();
    let stop = StoppingRule::by_subgradient_calls(70).with_residual_tol(0.0);
    let result = hippa_run(
        &Point::scalar(4.0).unwrap(),
        &f,
        &params,
        &ErrorSchedule::default(),
        &InnerBudgetSchedule::default(),
        &stop,
        &SgdssInner::default(),
        None,
    )
    .expect("run succeeds");
    assert_eq!(result.stop_reason, StopReason::SubgradientCallBudget);
    assert_eq!(result.subgradient_calls, 70, "cap must be hit exactly, not overshot");
    let traced: usize = result.trace.iter().map(|t| t.inner_iterations).sum();
    assert_eq!(traced as u64, result.subgradient_calls, "trace must account for all inner work");
}

#[test]
fn time_budget_zero_stops_after_first_record() {
    let f = abs_oracle();
    let params = EnvelopeParams::new(2.0, 1.0).unwrap();
    let stop = StoppingRule::by_seconds(0.0).with_residual_tol(0.0);
    let result = hippa_run(
        &Point::scalar(4.0).unwrap(),
        &f,
        &params,
        &ErrorSchedule::default(),
        &InnerBudgetSchedule::default(),
        &stop,
        &SgdssInner::default(),
        None,
    )
    .expect("run succeeds");
    assert_eq!(result.stop_reason, StopReason::TimeBudget);
    assert_eq!(result.trace.len(), 1);
    assert_eq!(result.trace[0].k, 0);
}

#[test]
fn sgdss_prox_agrees_with_brute_force_oracle() {
    let f = double_well_oracle();
    // γ = 0.3 keeps the subproblem strongly convex (1/γ > sup −f''), so the
    // prox is unique and the two solvers must land on the same point.
    let params = EnvelopeParams::new(2.0, 0.3).unwrap();
    let grid = GridSpec::line(-2.0, 2.0, 4001).unwrap();
    // λ = 0.05: the quartic's subgradient grows cubically, so the default
    // unit first step would fling the iterate out of the basin.
    let schedule = SgdssSchedule::new(0.05, 0.93, 400).unwrap();
    for &anchor in &[-1.0, -0.3, 0.4, 1.1] {
        let x = Point::scalar(anchor).unwrap();
        let sg = solve_prox_sgdss(&x, &f, &params, &schedule, None).expect("solver runs");
        let bf = brute_force_prox(&x, &f, &params, &grid).expect("grid search runs");
        assert!(!bf.is_multivalued(), "prox unexpectedly multivalued at {anchor}");
        let nearest = bf
            .minimizers
            .iter()
            .map(|n| (n.coord(0) - sg.y_bar.coord(0)).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= 2e-2, "prox mismatch at {anchor}: gap {nearest}");

        let (bf_env, slack) = brute_force_envelope(&x, &f, &params, &grid).unwrap();
        assert!(
            sg.envelope_value_inexact >= bf_env - slack - 1e-12,
            "inexact envelope undercuts truth at {anchor}"
        );
        assert!(
            sg.envelope_value_inexact <= bf_env + 1e-2,
            "inexact envelope too loose at {anchor}: {} vs {}",
            sg.envelope_value_inexact,
            bf_env
        );
    }
}

#[test]
fn boosted_outpaces_plain_hippa_on_quadratic() {
    let f = FnOracle::new(
        2,
        |x| 0.5 * (x[0] * x[0] + x[1] * x[1]),
        |x| x.to_vec(),
    )
    .with_lower_bound(0.0);
    let params = EnvelopeParams::new(2.0, 1.0).unwrap();
    let solver = ClosedFormInner { prox: |x: &Point| x.scale(0.5) };
    let stop = StoppingRule::by_outer_iterations(60).with_residual_tol(1e-8);
    let x0 = Point::new(vec![4.0, 3.0]).unwrap();

    let plain = hippa_run(
        &x0,
        &f,
        &params,
        &ErrorSchedule::default(),
        &InnerBudgetSchedule::constant(1),
        &stop,
        &solver,
        None,
    )
    .expect("plain run succeeds");
    let boosted = boosted_hippa_run(
        &x0,
        &f,
        &params,
        &ErrorSchedule::default(),
        &InnerBudgetSchedule::constant(1),
        &stop,
        &SpectralConfig::default(),
        50,
        &solver,
        None,
    )
    .expect("boosted run succeeds");

    assert_eq!(plain.stop_reason, StopReason::ResidualTolerance);
    assert_eq!(boosted.stop_reason, StopReason::ResidualTolerance);
    assert!(
        boosted.trace.len() < plain.trace.len(),
        "spectral steps should finish in fewer outer iterations ({} vs {})",
        boosted.trace.len(),
        plain.trace.len()
    );
    let cfg = SpectralConfig::default();
    for rec in &boosted.trace[..boosted.trace.len() - 1] {
        assert!(
            rec.sigma_k >= cfg.sigma_min && rec.sigma_k <= cfg.sigma_max,
            "σ_{} = {} escaped the clamp",
            rec.k,
            rec.sigma_k
        );
    }
}

#[test]
fn stop_reasons_serialize_snake_case() {
    let pairs = [
        (StopReason::ResidualTolerance, "\"residual_tolerance\""),
        (StopReason::OuterIterationBudget, "\"outer_iteration_budget\""),
        (StopReason::TimeBudget, "\"time_budget\""),
        (StopReason::SubgradientCallBudget, "\"subgradient_call_budget\""),
    ];
    for (reason, expected) in pairs {
        assert_eq!(serde_json::to_string(&reason).unwrap(), expected);
    }
}
