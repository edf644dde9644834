use heavytail_opt::record::RecordPolicy;
use heavytail_opt::schedules::{restart_plan_sgd, restart_plan_sstm, sstm_schedule, ParamMode, ScheduleInputs};
use heavytail_opt::sgd::{run_clipped_sgd, run_restarted_sgd, sgd_step, SgdOptions, SgdState};
use heavytail_opt::sstm::{run_restarted_sstm, run_sstm, sstm_step, SstmState};
use heavytail_opt::{
    make_noise, make_problem, sgd_theorem_params, sstm_theorem_params, trial_rng, NoiseModel, NoiseSpec,
    ProblemInstance, ProblemSpec, Vector,
};

fn quad10() -> ProblemInstance {
    make_problem(&ProblemSpec::diagonal_quadratic((0..10).map(|i| 1.0 + i as f64).collect())).unwrap()
}

fn t3(sigma: f64, n: usize) -> NoiseModel {
    make_noise(&NoiseSpec::StudentT { sigma, df: 3.0 }, n).unwrap()
}

fn start(n: usize, r: f64) -> Vector {
    let v = Vector::from_vec((0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()).unwrap();
    v.scaled(r / v.norm())
}

#[test]
fn sstm_is_seed_deterministic() {
    let p = quad10();
    let noise = t3(1.0, 10);
    let mut cfg = sstm_theorem_params(1.0, 10.0, 1e-1, 0.1, 1.0, 1.0).unwrap();
    cfg.n = 300;
    let x0 = start(10, 1.0);
    let a = run_sstm(&cfg, &p, &noise, &x0, &mut trial_rng(42), RecordPolicy::Every).unwrap();
    let b = run_sstm(&cfg, &p, &noise, &x0, &mut trial_rng(42), RecordPolicy::Every).unwrap();
    assert_eq!(a.output, b.output);
    assert_eq!(a.record, b.record);
    let c = run_sstm(&cfg, &p, &noise, &x0, &mut trial_rng(43), RecordPolicy::Every).unwrap();
    assert_ne!(a.output, c.output);
}

#[test]
fn sgd_is_seed_deterministic() {
    let p = quad10();
    let noise = t3(1.0, 10);
    let mut cfg = sgd_theorem_params(1.0, 10.0, 1e-1, 0.1, 1.0, 1.0).unwrap();
    cfg.n = 500;
    let x0 = start(10, 1.0);
    let o = SgdOptions::default();
    let a = run_clipped_sgd(&cfg, &o, &p, &noise, &x0, &mut trial_rng(1), RecordPolicy::Every).unwrap();
    let b = run_clipped_sgd(&cfg, &o, &p, &noise, &x0, &mut trial_rng(1), RecordPolicy::Every).unwrap();
    assert_eq!(a.output, b.output);
    assert_eq!(a.record, b.record);
}

#[test]
fn sstm_oracle_calls_equal_batch_sum() {
    let p = quad10();
    let noise = t3(1.0, 10);
    let mut cfg = sstm_theorem_params(1.0, 10.0, 1e-1, 0.1, 1.0, 1.0).unwrap();
    cfg.n = 2000;
    let want: u64 = sstm_schedule(&cfg, cfg.n).map(|e| e.m_k).sum();
    assert_eq!(cfg.total_oracle_calls(), want);
    let out = run_sstm(&cfg, &p, &noise, &start(10, 1.0), &mut trial_rng(0), RecordPolicy::FinalOnly).unwrap();
    assert_eq!(out.record.oracle_calls, want);
    assert_eq!(out.record.iterations, cfg.n);
}

#[test]
fn sstm_step_geometry() {
    // x^{k+1} and y^{k+1} lie on their parent segments; ‖z^{k+1} − z^k‖ ≤ B
    let p = make_problem(&ProblemSpec::diagonal_quadratic(vec![1.0, 5.0])).unwrap();
    let noise = t3(3.0, 2);
    let mut cfg = sstm_theorem_params(1.0, 5.0, 1e-2, 0.1, 1.0, 3.0).unwrap();
    cfg.n = 3000;
    let mut st = SstmState::new(&start(2, 1.0));
    let mut rng = trial_rng(5);
    let cross = |a: &Vector, b: &Vector, c: &Vector| {
        // 2-D collinearity of c with segment ab, plus betweenness
        let (u, v) = (b.sub(a), c.sub(a));
        let area = (u[0] * v[1] - u[1] * v[0]).abs();
        let t = if u.norm_sq() > 0.0 { u.dot(&v) / u.norm_sq() } else { 0.0 };
        (area / u.norm().max(1e-300), t)
    };
    for e in sstm_schedule(&cfg, cfg.n).skip(1) {
        let (y0, z0) = (st.y.clone(), st.z.clone());
        sstm_step(&mut st, &e, &p, &noise, &mut rng, None).unwrap();
        if e.k == 1 {
            assert_eq!(st.x, z0, "x¹ = z⁰");
        }
        let (d, t) = cross(&y0, &z0, &st.x);
        assert!(d <= 1e-10 * (1.0 + y0.norm()), "k = {}", e.k);
        assert!((-1e-10..=1.0 + 1e-10).contains(&t));
        let (d, t) = cross(&y0, &st.z, &st.y);
        assert!(d <= 1e-10 * (1.0 + y0.norm()), "k = {}", e.k);
        assert!((-1e-10..=1.0 + 1e-10).contains(&t));
        assert!(st.z.dist(&z0) <= cfg.b * (1.0 + 1e-12), "k = {}", e.k);
    }
}

#[test]
fn deterministic_stm_bound() {
    // σ = 0, λ effectively infinite: f(y^N) − f* ≤ C²R₀²/(2A_N)
    let p = make_problem(&ProblemSpec::diagonal_quadratic(vec![1.0; 4])).unwrap();
    let noise = make_noise(&NoiseSpec::Gaussian { sigma: 0.0 }, 4).unwrap();
    let mut cfg = sstm_theorem_params(1.0, 1.0, 1e-3, 0.1, 1.0, 0.0).unwrap();
    cfg.b = 1e300;
    cfg.n = 200;
    let out = run_sstm(&cfg, &p, &noise, &start(4, 1.0), &mut trial_rng(0), RecordPolicy::FinalOnly).unwrap();
    let a_n = sstm_schedule(&cfg, cfg.n).last().unwrap().a_k;
    let gap = p.gap(&out.output).unwrap();
    assert!(gap <= 7.0 / (2.0 * a_n), "{gap} > {}", 7.0 / (2.0 * a_n));
}

#[test]
fn sgd_step_movement_and_averaging() {
    let p = quad10();
    let noise = t3(5.0, 10);
    let mut cfg = sgd_theorem_params(1.0, 10.0, 1e-1, 0.1, 1.0, 5.0).unwrap();
    cfg.m = 1;
    let o = SgdOptions::default();
    let mut st = SgdState::new(&start(10, 1.0), &o);
    let mut rng = trial_rng(2);
    let mut sum = Vector::zeros(10);
    for _ in 0..2000 {
        let prev = st.x.clone();
        sum.axpy(1.0, &prev);
        sgd_step(&mut st, &cfg, &o, &p, &noise, &mut rng).unwrap();
        assert!(st.x.dist(&prev) <= cfg.gamma * cfg.lambda * (1.0 + 1e-12));
    }
    let avg = st.average();
    assert!(avg.dist(&sum.scaled(1.0 / 2000.0)) <= 1e-12 * avg.norm());
    assert!((cfg.gamma * cfg.lambda * cfg.log_factor - 1.0).abs() < 1e-14);
}

#[test]
fn unclipped_sgd_matches_huge_lambda() {
    let p = quad10();
    let noise = t3(1.0, 10);
    let mut cfg = sgd_theorem_params(1.0, 10.0, 1e-1, 0.1, 1.0, 1.0).unwrap();
    cfg.n = 100;
    cfg.m = 1;
    let x0 = start(10, 1.0);
    let none = SgdOptions { clip: heavytail_opt::ClipMode::None, momentum: None };
    let a = run_clipped_sgd(&cfg, &none, &p, &noise, &x0, &mut trial_rng(3), RecordPolicy::FinalOnly).unwrap();
    cfg.lambda = f64::INFINITY;
    let b = run_clipped_sgd(&cfg, &SgdOptions::default(), &p, &noise, &x0, &mut trial_rng(3), RecordPolicy::FinalOnly)
        .unwrap();
    assert_eq!(a.output, b.output);
}

#[test]
fn single_stage_restart_equals_plain_run() {
    let p = make_problem(&ProblemSpec::diagonal_quadratic(vec![1.0, 2.0])).unwrap();
    let noise = t3(0.5, 2);
    let inp = ScheduleInputs {
        nu: 1.0,
        m_nu: 2.0,
        eps: 0.25,
        beta: 0.1,
        r0: 1.0,
        sigma: 0.5,
    };
    let x0 = start(2, 1.0);
    let plan = restart_plan_sstm(1.0, &inp, ParamMode::Theorem).unwrap();
    assert_eq!(plan.tau, 1);
    let r = run_restarted_sstm(&plan, &p, &noise, &x0, &mut trial_rng(9), RecordPolicy::FinalOnly).unwrap();
    let s = run_sstm(&plan.stages[0].config, &p, &noise, &x0, &mut trial_rng(9), RecordPolicy::FinalOnly).unwrap();
    assert_eq!(r.output, s.output);

    let plan = restart_plan_sgd(1.0, &inp, ParamMode::Theorem).unwrap();
    let o = SgdOptions::default();
    let r = run_restarted_sgd(&plan, &o, &p, &noise, &x0, &mut trial_rng(9), RecordPolicy::FinalOnly).unwrap();
    let s = run_clipped_sgd(&plan.stages[0].config, &o, &p, &noise, &x0, &mut trial_rng(9), RecordPolicy::FinalOnly)
        .unwrap();
    assert_eq!(r.output, s.output);
}

#[test]
fn restart_rejects_merely_convex_problem() {
    let p = make_problem(&ProblemSpec::PowerNorm { dim: 2, nu: 0.5, shift: None }).unwrap();
    let noise = t3(0.5, 2);
    let inp = ScheduleInputs {
        nu: 0.5,
        m_nu: p.m_nu(),
        eps: 0.25,
        beta: 0.1,
        r0: 1.0,
        sigma: 0.5,
    };
    let plan = restart_plan_sstm(1.0, &inp, ParamMode::Theorem).unwrap();
    let e = run_restarted_sstm(&plan, &p, &noise, &start(2, 1.0), &mut trial_rng(0), RecordPolicy::FinalOnly);
    assert!(e.is_err());
}

#[test]
fn vanilla_sgd_divergence_is_flagged() {
    let p = make_problem(&ProblemSpec::diagonal_quadratic(vec![1.0])).unwrap();
    let noise = make_noise(&NoiseSpec::Gaussian { sigma: 0.0 }, 1).unwrap();
    let mut cfg = sgd_theorem_params(1.0, 1.0, 1e-1, 0.1, 1.0, 0.0).unwrap();
    cfg.gamma = 3.0; // |1 − γL| = 2: geometric blow-up
    cfg.n = 1000;
    let none = SgdOptions { clip: heavytail_opt::ClipMode::None, momentum: None };
    let out = run_clipped_sgd(&cfg, &none, &p, &noise, &start(1, 1.0), &mut trial_rng(0), RecordPolicy::Auto).unwrap();
    assert!(out.record.diverged);
    assert!(out.record.iterations < 1000);
}

#[test]
fn momentum_and_coordinate_clipping_run() {
    let p = quad10();
    let noise = t3(1.0, 10);
    let mut cfg = sgd_theorem_params(1.0, 10.0, 1e-1, 0.1, 1.0, 1.0).unwrap();
    cfg.n = 200;
    for o in [
        SgdOptions { clip: heavytail_opt::ClipMode::Coordinate, momentum: None },
        SgdOptions { clip: heavytail_opt::ClipMode::Norm, momentum: Some(0.9) },
    ] {
        let out = run_clipped_sgd(&cfg, &o, &p, &noise, &start(10, 1.0), &mut trial_rng(0), RecordPolicy::Auto).unwrap();
        assert!(!out.record.diverged);
        assert!(p.gap(&out.output).unwrap() < p.gap(&start(10, 1.0)).unwrap());
    }
}
