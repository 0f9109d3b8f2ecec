//! Quick self-checks run by the `verify` command.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::TimeGrid;
use crate::kernels::{eval_kernel, gram_matrix, Hurst, KernelSpec};
use crate::model::{
    check_scaling_assumption, check_theta_assumption, InitialLaw, ModelParams, RescalingScheme, ThetaVerdict,
    VolFunction, VolShape,
};
use crate::paths::fbm_covariance;
use crate::rates::{
    penalized_objective, solve, tail_rate, ControlVector, RateOptions, Sense, SolverOptions, StartResponse, StartSpec,
    TerminalConstraint, VariationalProblem,
};
use crate::smile::{bs_implied_vol, bs_price};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn h(x: f64) -> Hurst {
    Hurst::new(x).expect("valid Hurst index")
}

fn problem(
    kernel: KernelSpec,
    vol: VolShape,
    rho: f64,
    level: f64,
    sense: Sense,
    n: usize,
) -> Result<VariationalProblem> {
    Ok(VariationalProblem {
        kernel,
        vol,
        rho,
        include_drift: false,
        start: StartSpec::Fixed { u: 0.0 },
        start_response: StartResponse::Constant,
        constraint: TerminalConstraint { level, sense, node: None },
        grid: TimeGrid::uniform(n)?,
    })
}

fn kernel_reductions() -> Result<Check> {
    let (beta, xi) = (-0.7, 1.3);
    let mut worst: f64 = 0.0;
    for (t, s) in [(1.0, 0.5), (0.3, 0.01), (2.0, 1.9)] {
        let k = eval_kernel(&KernelSpec::KFbm { hurst: h(0.5) }, t, s)?;
        let f = eval_kernel(&KernelSpec::FFou { hurst: h(0.5), beta, xi }, t, s)?;
        let g = eval_kernel(&KernelSpec::GZero { hurst: h(0.5), xi }, t, s)?;
        worst = worst.max((k - 1.0).abs()).max((f - xi * (beta * (t - s)).exp()).abs()).max((g - xi).abs());
    }
    Ok(Check::new("kernel reductions at H = 1/2", worst <= 1e-12, format!("max error {worst:.2e}")))
}

fn small_beta() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for hv in [0.3, 0.7] {
        for (t, s) in [(1.0, 0.5), (0.4, 0.05), (0.9, 0.85)] {
            let f = eval_kernel(&KernelSpec::FFou { hurst: h(hv), beta: 1e-6, xi: 2.0 }, t, s)?;
            let k = eval_kernel(&KernelSpec::KFbm { hurst: h(hv) }, t, s)?;
            worst = worst.max((f - 2.0 * k).abs() / (2.0 * k));
        }
    }
    Ok(Check::new("F tends to xi K as beta -> 0", worst <= 1e-4, format!("max relative error {worst:.2e}")))
}

fn gram_covariance() -> Result<Check> {
    let grid = TimeGrid::uniform(8)?;
    let mut worst: f64 = 0.0;
    for hv in [0.3, 0.7] {
        let g = gram_matrix(&KernelSpec::KFbm { hurst: h(hv) }, &grid)?;
        for i in 0..8 {
            for j in 0..8 {
                let c = fbm_covariance(h(hv), grid.nodes()[i], grid.nodes()[j]);
                worst = worst.max((g.get(i, j) - c).abs() / c);
            }
        }
    }
    Ok(Check::new(
        "Gram matrix of K equals the fBm covariance",
        worst <= 1e-6,
        format!("max relative error {worst:.2e}"),
    ))
}

fn schilder(opts: &SolverOptions) -> Result<Check> {
    let p = problem(KernelSpec::Identity, VolShape::Constant { c: 1.0 }, 0.0, 1.0, Sense::Ge, 16)?;
    let r = solve(&p, opts)?;
    let err = (r.value - 0.5).abs();
    Ok(Check::new("Schilder rate", err <= 1e-6, format!("value {:.10}", r.value)))
}

fn degenerate_tail(opts: &SolverOptions) -> Result<Check> {
    let params =
        ModelParams { lambda: 0.0, beta: -1.0, xi: 1.0, rho: 0.0, hurst: h(0.3), vol: VolFunction::constant(1.0, 1.0) };
    let ro = RateOptions { grid_nodes: 16, solver: opts.clone(), ..RateOptions::default() };
    let r = tail_rate(&params, 1.0, 1.0, &ro)?;
    let err = (r.value - 9.0 / 8.0).abs();
    Ok(Check::new("constant-vol tail rate is 9/8", err <= 1e-6, format!("value {:.10}", r.value)))
}

fn homogeneity_symmetry(opts: &SolverOptions) -> Result<Check> {
    let kernel = KernelSpec::GZero { hurst: h(0.3), xi: 1.0 };
    let base = problem(kernel, VolShape::Linear, 0.0, 0.5, Sense::Eq, 12)?;
    let v1 = solve(&base, opts)?.value;
    let v2 = solve(&base.with_level(1.0, Sense::Eq), opts)?.value;
    let vm = solve(&base.with_level(-0.5, Sense::Eq), opts)?.value;
    let ratio = v2 / v1;
    let asym = (v1 - vm).abs();
    Ok(Check::new(
        "homogeneity and symmetry of rates",
        (1.98..=2.02).contains(&ratio) && asym <= 1e-4,
        format!("ratio {ratio:.6}, asymmetry {asym:.2e}"),
    ))
}

fn gradient() -> Result<Check> {
    let mut p = problem(
        KernelSpec::FFou { hurst: h(0.3), beta: -1.0, xi: 1.0 },
        VolShape::AffineAbs { c0: 0.3, c1: 1.0 },
        -0.4,
        0.7,
        Sense::Eq,
        5,
    )?;
    p.include_drift = true;
    let c = ControlVector { f: vec![0.3, -0.2, 0.5, 0.1, -0.4], g: vec![0.2, 0.4, -0.1, 0.6, 0.3] };
    let (_, grad, _) = penalized_objective(&p, &c, 0.0, 0.5, 2.0)?;
    let mut worst: f64 = 0.0;
    let step = 1e-5;
    for i in 0..10 {
        let bump = |d: f64| {
            let mut q = c.clone();
            if i < 5 {
                q.f[i] += d;
            } else {
                q.g[i - 5] += d;
            }
            penalized_objective(&p, &q, 0.0, 0.5, 2.0).map(|r| r.0)
        };
        let fd = (bump(step)? - bump(-step)?) / (2.0 * step);
        let an = if i < 5 { grad.f[i] } else { grad.g[i - 5] };
        worst = worst.max((fd - an).abs() / an.abs().max(1.0));
    }
    Ok(Check::new("objective gradient", worst <= 1e-6, format!("max relative error {worst:.2e}")))
}

fn implied_vol() -> Result<Check> {
    let price = bs_price(1.0, 1.0, 1.0, 0.2);
    let v = bs_implied_vol(price, 1.0, 1.0, 1.0)?;
    let err = (v - 0.2).abs();
    Ok(Check::new("Black-Scholes inversion", err <= 1e-10, format!("error {err:.2e}")))
}

fn audits() -> Result<Check> {
    let ladder = [0.5, 0.1, 0.01];
    let tails = RescalingScheme::Tails { b: 1.0 };
    let mut ok = true;
    for law in [InitialLaw::Point { value: 0.1 }, InitialLaw::Uniform { lo: 0.0, hi: 0.2 }] {
        ok &= check_theta_assumption(&law, tails, h(0.3), &ladder)?.verdict == ThetaVerdict::DivergesToMinusInfinity;
    }
    let gaussian = InitialLaw::Gaussian { mean: 0.0, var: 1.0 };
    ok &= check_theta_assumption(&gaussian, tails, h(0.3), &ladder)?.verdict == ThetaVerdict::Stalls;
    let lattice: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.5).collect();
    let scaling = check_scaling_assumption(&VolFunction::linear(1.0), &ladder, &lattice, 0.0);
    ok &= scaling.pass;
    Ok(Check::new("assumption audits", ok, format!("scaling deviations {:?}", scaling.deviations)))
}

/// Runs every quick check. A check that errors counts as failed.
pub fn quick_checks(solver: &SolverOptions) -> Vec<Check> {
    let runs: Vec<(&str, Result<Check>)> = vec![
        ("kernel reductions at H = 1/2", kernel_reductions()),
        ("F tends to xi K as beta -> 0", small_beta()),
        ("Gram matrix of K equals the fBm covariance", gram_covariance()),
        ("Schilder rate", schilder(solver)),
        ("constant-vol tail rate is 9/8", degenerate_tail(solver)),
        ("homogeneity and symmetry of rates", homogeneity_symmetry(solver)),
        ("objective gradient", gradient()),
        ("Black-Scholes inversion", implied_vol()),
        ("assumption audits", audits()),
    ];
    runs.into_iter().map(|(name, r)| r.unwrap_or_else(|e| Check::new(name, false, e.to_string()))).collect()
}
