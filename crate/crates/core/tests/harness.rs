use heavytail_opt::harness::{
    clip_bias_monte_carlo, log_free_iterations, run_experiment, DerivedParams, ExperimentSpec, Method,
    ParamsSpec, StartSpec, Targets,
};
use heavytail_opt::{
    make_noise, make_problem, trial_rng, ParamMode, ParamOverrides, ProblemSpec, RecordPolicy, Vector,
    NoiseSpec,
};

fn spec(method: Method, sigma: f64, trials: u64) -> ExperimentSpec {
    ExperimentSpec {
        problem: ProblemSpec::diagonal_quadratic(vec![1.0, 2.0, 4.0]),
        noise: NoiseSpec::StudentT { sigma, df: 3.0 },
        method,
        targets: Targets { eps: 0.05, beta: 0.1, mu: None },
        trials,
        seed: 17,
        params: ParamsSpec {
            mode: ParamMode::Manual,
            overrides: ParamOverrides { n: Some(300), m: Some(2), ..Default::default() },
            sgd: Default::default(),
        },
        start: StartSpec { x0: Some(vec![0.3, -0.2, 0.1]), r0: None },
        record: RecordPolicy::Auto,
    }
}

#[test]
fn worker_count_does_not_change_results() {
    for method in [Method::ClippedSstm, Method::ClippedSgd] {
        let s = spec(method, 1.0, 6);
        let a = run_experiment(&s, 1).unwrap();
        let b = run_experiment(&s, 4).unwrap();
        let sa: Vec<_> = a.trials.iter().map(|t| t.summary.clone()).collect();
        let sb: Vec<_> = b.trials.iter().map(|t| t.summary.clone()).collect();
        assert_eq!(sa, sb);
        assert_eq!(a.summary, b.summary);
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!(x.trajectory, y.trajectory);
        }
        let ids: Vec<u64> = a.trials.iter().map(|t| t.summary.trial_id).collect();
        assert_eq!(ids, (0..6).collect::<Vec<_>>());
        assert!(a.trials.iter().all(|t| t.summary.seed == 17 + t.summary.trial_id));
    }
}

#[test]
fn zero_noise_trials_are_identical() {
    let r = run_experiment(&spec(Method::ClippedSstm, 0.0, 5), 2).unwrap();
    let first = &r.trials[0].summary;
    for t in &r.trials {
        assert_eq!(t.summary.final_gap, first.final_gap);
        assert_eq!(t.trajectory, r.trials[0].trajectory);
    }
    assert!(r.summary.success_rate == 0.0 || r.summary.success_rate == 1.0);
}

#[test]
fn summary_statistics_are_consistent() {
    let r = run_experiment(&spec(Method::ClippedSgd, 2.0, 12), 2).unwrap();
    let q = r.summary.gap_quantiles;
    assert!(q.q50 <= q.q90 && q.q90 <= q.q95);
    assert!((0.0..=1.0).contains(&r.summary.success_rate));
    assert!(r.summary.clopper_pearson_lower <= r.summary.success_rate);
    for t in &r.trials {
        assert!(t.summary.final_gap >= -1e-9);
        assert_eq!(t.summary.total_oracle_calls, r.params.total_oracle_calls());
        assert_eq!(t.summary.success, t.summary.final_gap <= 0.05);
    }
    let b = &r.summary.budget_gap_quantiles;
    assert_eq!(b.len(), 3);
    assert_eq!(b[2].oracle_calls, r.params.total_oracle_calls());
}

#[test]
fn restart_trials_report_halving() {
    let mut s = spec(Method::RClippedSstm, 0.5, 3);
    s.problem = ProblemSpec::diagonal_quadratic(vec![1.0, 2.0]);
    s.start = StartSpec { x0: None, r0: Some(1.0) };
    s.targets.eps = 0.125;
    let r = run_experiment(&s, 1).unwrap();
    let DerivedParams::RestartSstm(plan) = &r.params else { panic!() };
    assert_eq!(plan.tau, 2);
    for t in &r.trials {
        assert_eq!(t.stages.len(), 2);
        assert!(t.summary.stage_halving_ok.is_some());
        let calls: u64 = t.stages.iter().map(|s| s.record.oracle_calls).sum();
        assert_eq!(calls, t.summary.total_oracle_calls);
        // trajectory is cumulative over stages
        assert!(t.trajectory.windows(2).all(|w| w[0].iter < w[1].iter && w[0].oracle_calls <= w[1].oracle_calls));
    }
    assert!(r.summary.halving_gate.is_some());
}

#[test]
fn restart_needs_strong_convexity() {
    let mut s = spec(Method::RClippedSgd, 0.5, 1);
    s.problem = ProblemSpec::PowerNorm { dim: 3, nu: 0.5, shift: None };
    let e = run_experiment(&s, 1).unwrap_err();
    assert!(e.to_string().contains("mu"), "{e}");
}

#[test]
fn larger_budget_does_not_hurt() {
    // paired seeds: doubling N never lowers the success count by more than
    // binomial noise
    let mut s = spec(Method::ClippedSgd, 1.0, 40);
    s.params.mode = ParamMode::Manual;
    s.targets.eps = 0.01;
    s.params.overrides = ParamOverrides { n: Some(200), gamma: Some(0.05), m: Some(1), ..Default::default() };
    let short = run_experiment(&s, 2).unwrap();
    s.params.overrides.n = Some(800);
    let long = run_experiment(&s, 2).unwrap();
    let slack = 3.0 * (40.0 * 0.25f64).sqrt();
    assert!(long.summary.successes as f64 >= short.summary.successes as f64 - slack);
}

#[test]
fn spec_round_trips_through_json() {
    let mut s = spec(Method::RClippedSgd, 1.0, 3);
    s.targets.mu = Some(1.0);
    let j = serde_json::to_string(&s).unwrap();
    let back: ExperimentSpec = serde_json::from_str(&j).unwrap();
    assert_eq!(s, back);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = spec(Method::ClippedSstm, 1.0, 0);
    assert!(run_experiment(&s, 1).is_err());
    s.trials = 1;
    s.targets.beta = 1.5;
    let e = run_experiment(&s, 1).unwrap_err();
    assert!(e.to_string().contains("beta"), "{e}");
    s.targets.beta = 0.1;
    s.params.mode = ParamMode::Theorem;
    assert!(run_experiment(&s, 1).is_err(), "overrides outside manual mode");
}

#[test]
fn manual_overrides_apply() {
    let mut s = spec(Method::ClippedSstm, 1.0, 1);
    s.params.mode = ParamMode::Manual;
    s.params.overrides = ParamOverrides { n: Some(50), m: Some(3), ak_ratio_cap: Some(0.99), ..Default::default() };
    let r = run_experiment(&s, 1).unwrap();
    assert_eq!(r.trials[0].summary.total_oracle_calls, 150);
}

#[test]
fn log_free_iterations_removes_a() {
    let s = spec(Method::ClippedSstm, 1.0, 1);
    let r = s.resolve().unwrap();
    let DerivedParams::Sstm(c) = &r.params else { panic!() };
    let v = log_free_iterations(&r.params).unwrap();
    assert!((v - c.n as f64 / c.a.sqrt()).abs() <= 1e-12 * v);
}

#[test]
fn clip_bias_zero_noise_is_exact() {
    let p = make_problem(&ProblemSpec::diagonal_quadratic(vec![1.0, 2.0])).unwrap();
    let noise = make_noise(&NoiseSpec::Gaussian { sigma: 0.0 }, 2).unwrap();
    let x = Vector::from_vec(vec![0.1, 0.1]).unwrap();
    let e = clip_bias_monte_carlo(&p, &noise, &x, 1.0, 4, 1000, &mut trial_rng(0)).unwrap();
    assert!(!e.skipped);
    assert_eq!((e.bias, e.distortion, e.variance), (0.0, 0.0, 0.0));
}

#[test]
fn clip_bias_student_t() {
    let p = make_problem(&ProblemSpec::diagonal_quadratic(vec![1.0, 2.0, 3.0])).unwrap();
    let noise = make_noise(&NoiseSpec::StudentT { sigma: 1.0, df: 3.0 }, 3).unwrap();
    let x = Vector::from_vec(vec![0.2, -0.1, 0.1]).unwrap();
    let lambda = 4.0 * p.gradient(&x).norm();
    for m in [1, 4] {
        let e = clip_bias_monte_carlo(&p, &noise, &x, lambda, m, 200_000, &mut trial_rng(m)).unwrap();
        assert!(!e.skipped);
        assert!(e.ok(), "{e:?}");
        assert!(e.bias > 0.0);
    }
}

#[test]
fn clip_bias_hypothesis_violation_is_skipped() {
    let p = make_problem(&ProblemSpec::diagonal_quadratic(vec![1.0])).unwrap();
    let noise = make_noise(&NoiseSpec::StudentT { sigma: 1.0, df: 3.0 }, 1).unwrap();
    let x = Vector::from_vec(vec![1.0]).unwrap();
    let e = clip_bias_monte_carlo(&p, &noise, &x, 1.0, 1, 1000, &mut trial_rng(0)).unwrap();
    assert!(e.skipped && e.ok());
}
