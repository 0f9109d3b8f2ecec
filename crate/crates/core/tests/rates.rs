use proptest::prelude::*;
use rough_ldp::model::{ModelParams, VolFunction, VolShape};
use rough_ldp::rates::*;
use rough_ldp::{Hurst, KernelSpec, TimeGrid};

fn problem(
    kernel: KernelSpec,
    vol: VolShape,
    rho: f64,
    drift: bool,
    level: f64,
    sense: Sense,
    n: usize,
) -> VariationalProblem {
    VariationalProblem {
        kernel,
        vol,
        rho,
        include_drift: drift,
        start: StartSpec::Fixed { u: 0.0 },
        start_response: StartResponse::Constant,
        constraint: TerminalConstraint { level, sense, node: None },
        grid: TimeGrid::uniform(n).unwrap(),
    }
}

fn schilder(n: usize) -> VariationalProblem {
    problem(KernelSpec::Identity, VolShape::Constant { c: 1.0 }, 0.0, false, 1.0, Sense::Ge, n)
}

fn g0(h: f64) -> KernelSpec {
    KernelSpec::GZero { hurst: Hurst::new(h).unwrap(), xi: 1.0 }
}

fn params(h: f64, rho: f64, vol: VolFunction) -> ModelParams {
    ModelParams { lambda: 0.0, beta: -1.0, xi: 1.0, rho, hurst: Hurst::new(h).unwrap(), vol }
}

fn opts(n: usize) -> RateOptions {
    RateOptions { grid_nodes: n, ..RateOptions::default() }
}

#[test]
fn zero_controls_give_zero_paths() {
    let p = problem(g0(0.3), VolShape::Linear, 0.4, false, 1.0, Sense::Eq, 8);
    let (y, x) = path_from_controls(&p, &ControlVector::zeros(8), 0.0).unwrap();
    assert!(y.iter().chain(&x).all(|v| *v == 0.0));
}

#[test]
fn unit_g_gives_identity_path() {
    let p = problem(KernelSpec::Identity, VolShape::Constant { c: 1.0 }, 0.0, false, 1.0, Sense::Eq, 10);
    let c = ControlVector { f: vec![0.0; 10], g: vec![1.0; 10] };
    let (_, x) = path_from_controls(&p, &c, 0.0).unwrap();
    for (k, xk) in x.iter().enumerate() {
        assert!((xk - (k + 1) as f64 / 10.0).abs() < 1e-12);
    }
}

#[test]
fn linear_vol_polynomial_path() {
    let p = problem(KernelSpec::Identity, VolShape::Linear, 1.0, false, 1.0, Sense::Eq, 16);
    let c = ControlVector { f: vec![1.0; 16], g: vec![0.0; 16] };
    let (y, x) = path_from_controls(&p, &c, 0.0).unwrap();
    for k in 0..16 {
        let t = (k + 1) as f64 / 16.0;
        assert!((y[k] - t).abs() < 1e-10);
        assert!((x[k] - t * t / 2.0).abs() < 1e-3, "{} vs {}", x[k], t * t / 2.0);
    }
}

#[test]
fn path_rejects_wrong_length() {
    let p = schilder(8);
    assert!(path_from_controls(&p, &ControlVector::zeros(7), 0.0).is_err());
}

#[test]
fn schilder_value_and_minimizer() {
    let r = solve(&schilder(32), &SolverOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.value - 0.5).abs() < 1e-6, "{}", r.value);
    assert!(r.controls.g.iter().all(|g| (g - 1.0).abs() < 1e-4));
    assert!(r.controls.f.iter().all(|f| f.abs() < 1e-4));
}

#[test]
fn schilder_brute_force() {
    let b = brute_force_rate(&schilder(4), 4).unwrap();
    assert!((b.value - 0.5).abs() < 1e-4, "{}", b.value);
}

#[test]
fn infeasible_is_infinite() {
    let p = problem(KernelSpec::Identity, VolShape::Constant { c: 0.0 }, 0.0, false, 1.0, Sense::Ge, 8);
    let r = solve(&p, &SolverOptions::default()).unwrap();
    assert!(r.value.is_infinite());
    assert!(!r.warnings.is_empty());
    assert!(brute_force_rate(&p, 6).unwrap().value.is_infinite());
}

#[test]
fn energy_matches_value() {
    let p = problem(g0(0.3), VolShape::Linear, 0.3, false, 1.0, Sense::Eq, 24);
    let r = solve(&p, &SolverOptions::default()).unwrap();
    let e = l2_energy(&r.controls.f, &r.controls.g, &p.grid).unwrap();
    assert!((r.value - e).abs() <= 1e-10 * e.max(1.0));
    assert!(r.converged);
    assert!((r.x_path.last().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn degenerate_tail_example() {
    let p = params(0.3, 0.0, VolFunction::constant(1.0, 1.0));
    let r = tail_rate(&p, 1.0, 1.0, &opts(24)).unwrap();
    assert!((r.value - 9.0 / 8.0).abs() < 1e-6, "{}", r.value);
    assert!(r.controls.g.iter().all(|g| (g - 1.5).abs() < 1e-4));
    let mut q = problem(
        KernelSpec::FFou { hurst: p.hurst, beta: p.beta, xi: p.xi },
        VolShape::Constant { c: 1.0 },
        0.0,
        true,
        1.0,
        Sense::Ge,
        6,
    );
    q.start_response = StartResponse::Exponential { beta: p.beta };
    let b = brute_force_rate(&q, 6).unwrap();
    assert!((b.value - 9.0 / 8.0).abs() < 1e-4, "{}", b.value);
}

#[test]
fn tail_rate_monotone_in_level() {
    let p = params(0.5, -0.3, VolFunction::linear(1.0));
    let v: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&y| tail_rate(&p, y, 1.0, &opts(16)).unwrap().value).collect();
    assert!(v[0] <= v[1] + 1e-9 && v[1] <= v[2] + 1e-9, "{v:?}");
}

#[test]
fn equality_problem_matches_oracle() {
    let p = problem(g0(0.5), VolShape::Linear, 0.0, false, 1.0, Sense::Eq, 6);
    let r = solve(&p, &SolverOptions::default()).unwrap();
    let b = brute_force_rate(&p, 6).unwrap();
    assert!((r.value - b.value).abs() <= 1e-3, "{} vs {}", r.value, b.value);
}

#[test]
fn tail_rate_matches_oracle_linear_half() {
    let p = params(0.5, 0.0, VolFunction::linear(1.0));
    let r = tail_rate(&p, 1.0, 1.0, &opts(6)).unwrap();
    let mut q = problem(
        KernelSpec::FFou { hurst: p.hurst, beta: p.beta, xi: p.xi },
        VolShape::Linear,
        0.0,
        true,
        1.0,
        Sense::Ge,
        6,
    );
    q.start_response = StartResponse::Exponential { beta: p.beta };
    let b = brute_force_rate(&q, 6).unwrap();
    assert!((r.value - b.value).abs() <= 1e-3, "{} vs {}", r.value, b.value);
}

#[test]
fn oracle_homogeneity() {
    let p = problem(g0(0.5), VolShape::Linear, 0.0, false, 0.5, Sense::Eq, 5);
    let a = brute_force_rate(&p, 5).unwrap().value;
    let b = brute_force_rate(&p.with_level(1.0, Sense::Eq), 5).unwrap().value;
    assert!((b / a - 2.0).abs() < 1e-2, "{a} {b}");
}

#[test]
fn smalltime_zero_level() {
    let p = params(0.3, 0.2, VolFunction::linear(0.5));
    let r = smalltime_rate(&p, 0.0, 0.5, &opts(16)).unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn smalltime_homogeneity_and_symmetry() {
    let p = params(0.3, 0.0, VolFunction::linear(0.5));
    let v1 = smalltime_rate(&p, 0.5, 0.5, &opts(16)).unwrap().value;
    let v2 = smalltime_rate(&p, 1.0, 0.5, &opts(16)).unwrap().value;
    let vm = smalltime_rate(&p, -0.5, 0.5, &opts(16)).unwrap().value;
    assert!((v2 / v1 - 2.0).abs() < 1e-4, "{v1} {v2}");
    assert!((vm - v1).abs() < 1e-6 * v1, "{v1} {vm}");
}

#[test]
fn smalltime_warns_below_bound() {
    let p = params(0.1, 0.0, VolFunction::linear(0.1));
    let r = smalltime_rate(&p, 1.0, 0.1, &opts(16)).unwrap();
    assert!(!r.warnings.is_empty());
}

#[test]
fn random_start_degenerate_interval() {
    let p = params(0.5, 0.3, VolFunction::linear(1.0));
    let a = rate_with_random_start(&p, 1.0, (0.2, 0.2), &opts(16)).unwrap();
    let mut q = problem(g0(0.5), VolShape::Linear, 0.3, false, 1.0, Sense::Ge, 16);
    q.start = StartSpec::Fixed { u: 0.2 };
    let b = solve(&q, &SolverOptions::default()).unwrap();
    assert!((a.value - b.value).abs() < 1e-10);
    assert_eq!(a.start_used, 0.2);
}

#[test]
fn random_start_set_inclusion() {
    let p = params(0.5, 0.0, VolFunction::linear(1.0));
    let o = opts(16);
    let wide = rate_with_random_start(&p, 1.0, (0.0, 0.2), &o).unwrap();
    let narrow = rate_with_random_start(&p, 1.0, (0.0, 0.1), &o).unwrap();
    assert!(wide.value <= narrow.value + 1e-8);
    assert!((0.0..=0.2).contains(&wide.start_used));
    for u in [0.0, 0.05, 0.1, 0.15, 0.2] {
        let fixed = rate_with_random_start(&p, 1.0, (u, u), &o).unwrap();
        assert!(wide.value <= fixed.value + 1e-8, "u={u}: {} > {}", wide.value, fixed.value);
    }
}

#[test]
fn grid_refinement_is_cauchy() {
    let p = params(0.3, -0.4, VolFunction::linear(0.5));
    let v: Vec<f64> = [32, 64, 128].iter().map(|&n| smalltime_rate(&p, 1.0, 0.5, &opts(n)).unwrap().value).collect();
    assert!((v[2] - v[1]).abs() < (v[1] - v[0]).abs(), "{v:?}");
}

#[test]
fn problem_json_round_trip() {
    let p = problem(g0(0.3), VolShape::Linear, 0.3, true, 1.0, Sense::Ge, 8);
    let s = serde_json::to_string(&p).unwrap();
    let q: VariationalProblem = serde_json::from_str(&s).unwrap();
    assert_eq!(p, q);
    assert!(serde_json::from_str::<VariationalProblem>(&s.replacen("\"rho\"", "\"rh0\"", 1)).is_err());
}

fn gradient_check(p: &VariationalProblem, c: &ControlVector, u: f64) {
    let (lambda, mu) = (0.7, 3.0);
    let (_, grad, _) = penalized_objective(p, c, u, lambda, mu).unwrap();
    let n = c.f.len();
    for i in 0..2 * n {
        let mut plus = c.clone();
        let mut minus = c.clone();
        let h = 1e-5;
        let (slot_p, slot_m, g) = if i < n {
            (&mut plus.f[i], &mut minus.f[i], grad.f[i])
        } else {
            (&mut plus.g[i - n], &mut minus.g[i - n], grad.g[i - n])
        };
        *slot_p += h;
        *slot_m -= h;
        let fp = penalized_objective(p, &plus, u, lambda, mu).unwrap().0;
        let fm = penalized_objective(p, &minus, u, lambda, mu).unwrap().0;
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "component {i}: {fd} vs {g}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn gradient_matches_differences(
        f in prop::collection::vec(-1.0..1.0f64, 6),
        g in prop::collection::vec(-1.0..1.0f64, 6),
        rho in -0.9..0.9f64,
        u in -0.5..0.5f64,
    ) {
        let mut p = problem(
            KernelSpec::FFou { hurst: Hurst::new(0.3).unwrap(), beta: -1.0, xi: 1.2 },
            VolShape::AffineAbs { c0: 0.2, c1: 1.0 },
            rho, true, 0.8, Sense::Eq, 6,
        );
        p.start = StartSpec::Fixed { u };
        p.start_response = StartResponse::Exponential { beta: -1.0 };
        gradient_check(&p, &ControlVector { f, g }, u);
    }

    #[test]
    fn value_symmetric_without_correlation(k in 0.2..1.5f64) {
        let p = problem(g0(0.7), VolShape::Linear, 0.0, false, k, Sense::Eq, 8);
        let a = solve(&p, &SolverOptions::default()).unwrap().value;
        let b = solve(&p.with_level(-k, Sense::Eq), &SolverOptions::default()).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1e-3));
    }

    #[test]
    fn value_homogeneous_for_linear_vol(k in 0.2..1.5f64, c in 1.5..4.0f64, rho in -0.8..0.8f64) {
        let p = problem(g0(0.3), VolShape::Linear, rho, false, k, Sense::Eq, 8);
        let a = solve(&p, &SolverOptions::default()).unwrap().value;
        let b = solve(&p.with_level(c * k, Sense::Eq), &SolverOptions::default()).unwrap().value;
        prop_assert!((b / a - c).abs() <= 1e-5 * c, "{} {}", a, b);
    }
}
