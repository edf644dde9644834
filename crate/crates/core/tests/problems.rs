use heavytail_opt::oracle::{gradient_norm_bound, gradient_sq_bound, uniform_in_ball};
use heavytail_opt::{
    batched_stochastic_gradient, holder_certificate_check, make_noise, make_problem, trial_rng,
    NoiseModel, NoiseSpec, ProblemInstance, ProblemSpec, Vector,
};

fn shift(n: usize) -> Option<Vec<f64>> {
    Some((0..n).map(|i| 0.3 - 0.1 * i as f64).collect())
}

fn shipped() -> Vec<(&'static str, ProblemInstance)> {
    let specs = vec![
        ("quadratic_diag", ProblemSpec::Quadratic {
            dim: 3,
            eigenvalues: Some(vec![1.0, 4.0, 0.5]),
            hessian: None,
            shift: shift(3),
        }),
        ("quadratic_dense", ProblemSpec::Quadratic {
            dim: 2,
            eigenvalues: None,
            hessian: Some(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
            shift: shift(2),
        }),
        ("power_norm_0", ProblemSpec::PowerNorm { dim: 3, nu: 0.0, shift: shift(3) }),
        ("power_norm_half", ProblemSpec::PowerNorm { dim: 3, nu: 0.5, shift: shift(3) }),
        ("power_norm_1", ProblemSpec::PowerNorm { dim: 3, nu: 1.0, shift: shift(3) }),
        ("huberized", ProblemSpec::HuberizedNorm { dim: 3, c: 1.5, delta: 0.2, nu: 0.5, shift: shift(3) }),
        ("pl_max", ProblemSpec::PiecewiseLinearMax {
            dim: 2,
            slopes: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]],
            shift: shift(2),
        }),
        ("quad_plus_norm", ProblemSpec::QuadPlusNorm { dim: 3, mu: 0.5, c: 1.0, radius: 4.0, shift: shift(3) }),
    ];
    specs.into_iter().map(|(n, s)| (n, make_problem(&s).unwrap())).collect()
}

fn xs(p: &ProblemInstance) -> Vector {
    p.x_star.clone().unwrap()
}

#[test]
fn certificates_hold_on_every_problem() {
    let mut rng = trial_rng(11);
    for (name, p) in shipped() {
        let worst = holder_certificate_check(&p, 10_000, &mut rng);
        assert!(worst.is_ok(), "{name}: {worst:?}");
    }
}

#[test]
fn finite_differences_match_gradient() {
    let h = 1e-6;
    let mut rng = trial_rng(3);
    for (name, p) in shipped() {
        if !p.objective.differentiable() {
            continue;
        }
        let c = xs(&p);
        let mut checked = 0;
        while checked < 100 {
            let x = uniform_in_ball(&mut rng, &c, 2.0);
            // keep away from kinks of norm-type functions
            if x.dist(&c) < 1e-2 {
                continue;
            }
            let g = p.gradient(&x);
            let mut fd = Vector::zeros(p.dim());
            for i in 0..p.dim() {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                fd[i] = (p.value(&a) - p.value(&b)) / (2.0 * h);
            }
            let err = fd.dist(&g) / g.norm().max(1e-3);
            assert!(err < 1e-4, "{name}: rel err {err} at {x:?}");
            checked += 1;
        }
    }
}

#[test]
fn optimality_at_minimizer() {
    let mut rng = trial_rng(5);
    for (name, p) in shipped() {
        let c = xs(&p);
        let fs = p.f_star.unwrap();
        assert!(p.gradient(&c).norm() <= 1e-10, "{name}");
        assert!((p.value(&c) - fs).abs() <= 1e-15, "{name}");
        for _ in 0..1000 {
            let u = uniform_in_ball(&mut rng, &Vector::zeros(p.dim()), 1.0);
            let u = u.scaled(1.0 / u.norm().max(1e-300));
            for &d in &[1e-3, 1e-1, 1.0] {
                let mut x = c.clone();
                x.axpy(d, &u);
                assert!(p.value(&x) >= fs, "{name}");
            }
        }
    }
}

#[test]
fn merely_convex_instances_have_zero_mu() {
    for (name, p) in shipped() {
        match name {
            "quadratic_diag" => assert_eq!(p.mu, 0.5),
            "quad_plus_norm" => assert_eq!(p.mu, 0.5),
            "power_norm_1" => assert_eq!(p.mu, 1.0),
            "quadratic_dense" => assert!(p.mu > 0.0),
            _ => assert_eq!(p.mu, 0.0, "{name}"),
        }
    }
}

#[test]
fn strong_convexity_inequality() {
    let mut rng = trial_rng(8);
    for (name, p) in shipped() {
        if p.mu == 0.0 {
            continue;
        }
        let c = xs(&p);
        let r = p.smoothness.radius.min(3.0);
        for _ in 0..10_000 {
            let x = uniform_in_ball(&mut rng, &c, r);
            let y = uniform_in_ball(&mut rng, &c, r);
            let lhs = p.value(&y);
            let rhs = p.value(&x) + p.gradient(&x).dot(&y.sub(&x)) + 0.5 * p.mu * x.dist_sq(&y);
            assert!(lhs >= rhs - 1e-12 * (1.0 + lhs.abs()), "{name}: {lhs} < {rhs}");
        }
    }
}

#[test]
fn gradient_bounds_from_holder_continuity() {
    let mut rng = trial_rng(9);
    for (name, p) in shipped() {
        let c = xs(&p);
        let (nu, m) = (p.nu(), p.m_nu());
        let r = p.smoothness.radius.min(3.0);
        for _ in 0..2000 {
            let x = uniform_in_ball(&mut rng, &c, r / 3.0);
            let gap = p.gap(&x).unwrap();
            let g = p.gradient(&x).norm();
            let b = gradient_norm_bound(nu, m, gap);
            assert!(g <= b * (1.0 + 1e-9) + 1e-12, "{name}: {g} > {b}");
            for &delta in &[1e-3, 1.0, 1e3] {
                let b2 = gradient_sq_bound(nu, m, gap, delta);
                assert!(g * g <= b2 * (1.0 + 1e-9) + 1e-12, "{name}: δ = {delta}");
            }
        }
    }
}

#[test]
fn power_norm_grid_certificate() {
    // brute-force max of |∇f(x) − ∇f(y)| / |x − y|^0.5 over a 1-D grid
    let p = make_problem(&ProblemSpec::PowerNorm { dim: 1, nu: 0.5, shift: None }).unwrap();
    let n = 10_000;
    let pts: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
    let grads: Vec<f64> = pts
        .iter()
        .map(|&x| p.gradient(&Vector::from_vec(vec![x]).unwrap())[0])
        .collect();
    let mut worst = 0.0_f64;
    for i in 0..n {
        // strided partners plus the mirror point −x, which attains the maximum
        for j in (0..n).step_by(97).chain([n - 1 - i]) {
            if i == j {
                continue;
            }
            let r = (grads[i] - grads[j]).abs() / (pts[i] - pts[j]).abs().sqrt();
            worst = worst.max(r);
        }
    }
    assert!(worst <= p.m_nu() * (1.0 + 1e-9), "{worst} > {}", p.m_nu());
    // symmetric pairs ±x attain 2^{1−ν}
    assert!(worst >= 0.99 * p.m_nu(), "{worst}");
}

#[test]
fn abs_value_from_two_slopes() {
    let p = make_problem(&ProblemSpec::PiecewiseLinearMax {
        dim: 1,
        slopes: vec![vec![1.0], vec![-1.0]],
        shift: None,
    })
    .unwrap();
    assert_eq!(p.m_nu(), 2.0);
    assert_eq!(p.nu(), 0.0);
    assert_eq!(p.value(&Vector::from_vec(vec![-3.0]).unwrap()), 3.0);
    assert_eq!(p.gradient(&Vector::zeros(1))[0], 0.0);
}

fn quad(n: usize) -> ProblemInstance {
    make_problem(&ProblemSpec::diagonal_quadratic((1..=n).map(|i| i as f64).collect())).unwrap()
}

#[test]
fn noiseless_oracle_is_exact() {
    let p = quad(3);
    let noise = make_noise(&NoiseSpec::Gaussian { sigma: 0.0 }, 3).unwrap();
    let x = Vector::from_vec(vec![1.0, -2.0, 0.5]).unwrap();
    for m in [1, 7, 1000] {
        let s = batched_stochastic_gradient(&p, &noise, &x, m, &mut trial_rng(1)).unwrap();
        assert_eq!(s.value, p.gradient(&x));
        assert_eq!(s.batch_size, m);
        assert_eq!(s.oracle_calls_consumed, m);
    }
}

#[test]
fn gaussian_batch_mean_is_unbiased() {
    let p = quad(2);
    let noise = make_noise(&NoiseSpec::Gaussian { sigma: 1.0 }, 2).unwrap();
    let x = Vector::from_vec(vec![0.4, 0.1]).unwrap();
    let m = 1_000_000;
    let s = batched_stochastic_gradient(&p, &noise, &x, m, &mut trial_rng(2)).unwrap();
    // total variance σ² split over 2 coordinates
    let se = (1.0 / m as f64).sqrt();
    assert!(s.value.dist(&p.gradient(&x)) < 5.0 * se, "{:?}", s.value);
}

#[test]
fn heavy_tailed_oracle_mean_over_draws() {
    let p = quad(3);
    let x = Vector::from_vec(vec![0.4, 0.1, -0.2]).unwrap();
    let g = p.gradient(&x);
    for spec in [
        NoiseSpec::StudentT { sigma: 1.0, df: 3.0 },
        NoiseSpec::ParetoSymmetric { sigma: 1.0, tail_index: 2.5 },
    ] {
        let noise = make_noise(&spec, 3).unwrap();
        let mut rng = trial_rng(4);
        let draws = 200_000;
        let mut mean = Vector::zeros(3);
        for _ in 0..draws {
            let s = batched_stochastic_gradient(&p, &noise, &x, 1, &mut rng).unwrap();
            mean.axpy(1.0 / draws as f64, &s.value);
        }
        let se = (1.0 / draws as f64).sqrt();
        assert!(mean.dist(&g) < 5.0 * se, "{spec:?}: {}", mean.dist(&g));
    }
}

#[test]
fn student_t_second_moment_calibrated() {
    let noise = NoiseModel::new(NoiseSpec::StudentT { sigma: 2.0, df: 3.0 }, 4).unwrap();
    let mut rng = trial_rng(6);
    let n = 1_000_000;
    let m2 = (0..n).map(|_| noise.sample(&mut rng).norm_sq()).sum::<f64>() / n as f64;
    assert!((m2 - 4.0).abs() <= 0.02 * 4.0, "{m2}");
}

#[test]
fn gaussian_tail_is_sub_gaussian() {
    // P{‖ξ‖ > b} ≤ 2 exp(−b²/(2σ²))
    let noise = NoiseModel::new(NoiseSpec::Gaussian { sigma: 2.0 }, 3).unwrap();
    let mut rng = trial_rng(7);
    let n = 200_000;
    let norms: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng).norm()).collect();
    for i in 1..=10 {
        let b = 0.5 * i as f64 * 2.0;
        let emp = norms.iter().filter(|&&v| v > b).count() as f64 / n as f64;
        let bound = 2.0 * (-b * b / 8.0).exp();
        assert!(emp <= bound + 3.0 * (bound / n as f64).sqrt() + 1e-5, "b = {b}: {emp} > {bound}");
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let p = quad(3);
    let noise = make_noise(&NoiseSpec::Gaussian { sigma: 1.0 }, 3).unwrap();
    let x = Vector::zeros(2);
    assert!(batched_stochastic_gradient(&p, &noise, &x, 1, &mut trial_rng(0)).is_err());
}
