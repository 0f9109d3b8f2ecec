use serde::{Deserialize, Serialize};

use super::discretization::Discretization;
use super::lbfgs::{minimize, LbfgsOptions};
use super::{ControlVector, RateResult, Sense, StartSpec, VariationalProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Terminal constraint tolerance for a point to count as feasible.
    pub feasibility_tol: f64,
    /// Target for the scaled Lagrangian stationarity.
    pub kkt_tol: f64,
    /// Number of equality levels scanned for one-sided constraints.
    pub scan_levels: usize,
    /// Ratio between the farthest and nearest scanned level.
    pub scan_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_outer: 40, max_inner: 3000, feasibility_tol: 1e-6, kkt_tol: 1e-7, scan_levels: 11, scan_ratio: 4.0 }
    }
}

/// Optimization variables: `(f, g) · c` with `c = sqrt(t_n / n)`, so the
/// energy is close to `½|v|²`, followed by `θ` with
/// `u = mid + half · sin θ` when the start is free.
struct Layout<'a> {
    d: &'a Discretization,
    scale: f64,
    start: StartSpec,
}

struct Point {
    f: Vec<f64>,
    g: Vec<f64>,
    u: f64,
    du_dtheta: f64,
}

impl<'a> Layout<'a> {
    fn new(d: &'a Discretization, problem: &VariationalProblem) -> Self {
        let scale = (problem.grid.last() / d.n as f64).sqrt();
        Self { d, scale, start: problem.start }
    }

    fn free_start(&self) -> bool {
        matches!(self.start, StartSpec::Interval { lo, hi } if hi > lo)
    }

    fn dim(&self) -> usize {
        2 * self.d.n + usize::from(self.free_start())
    }

    fn unpack(&self, v: &[f64]) -> Point {
        let n = self.d.n;
        let f = v[..n].iter().map(|x| x / self.scale).collect();
        let g = v[n..2 * n].iter().map(|x| x / self.scale).collect();
        let (lo, hi) = self.start.bounds();
        let (u, du) = if self.free_start() {
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            (mid + half * v[2 * n].sin(), half * v[2 * n].cos())
        } else {
            (lo, 0.0)
        };
        Point { f, g, u, du_dtheta: du }
    }

    fn pack(&self, f: &[f64], g: &[f64], theta: f64) -> Vec<f64> {
        let mut v: Vec<f64> = f.iter().chain(g).map(|x| x * self.scale).collect();
        if self.free_start() {
            v.push(theta);
        }
        v
    }

    /// Energy and constraint value with gradients in `v` coordinates.
    fn eval(&self, v: &[f64], level: f64, de: &mut [f64], dc: &mut [f64]) -> (f64, f64) {
        let n = self.d.n;
        let p = self.unpack(v);
        let mut df = vec![0.0; n];
        let mut dg = vec![0.0; n];
        let (xm, du) = self.d.terminal_with_grad(&p.f, &p.g, p.u, &mut df, &mut dg);
        let s = self.scale;
        for j in 0..n {
            dc[j] = df[j] / s;
            dc[n + j] = dg[j] / s;
        }
        let mut mf = vec![0.0; n];
        let mut mg = vec![0.0; n];
        self.d.mass.apply(&p.f, &mut mf);
        self.d.mass.apply(&p.g, &mut mg);
        for j in 0..n {
            de[j] = mf[j] / s;
            de[n + j] = mg[j] / s;
        }
        if self.free_start() {
            dc[2 * n] = du * p.du_dtheta;
            de[2 * n] = 0.0;
        }
        (self.d.energy(&p.f, &p.g), xm - level)
    }

    fn terminal(&self, f: &[f64], g: &[f64], u: f64) -> f64 {
        self.d.forward(f, g, u).x[self.d.m]
    }
}

struct Candidate {
    v: Vec<f64>,
    value: f64,
    c: f64,
    multiplier: f64,
    kkt: f64,
    iterations: usize,
    converged: bool,
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Augmented Lagrangian from one starting point for `x(t_m) = level`.
fn augmented_lagrangian(layout: &Layout, v0: Vec<f64>, level: f64, opts: &SolverOptions) -> Candidate {
    let dim = layout.dim();
    let mut de = vec![0.0; dim];
    let mut dc = vec![0.0; dim];
    let mut v = v0;
    let (_, c0) = layout.eval(&v, level, &mut de, &mut dc);
    let cc = crate::linalg::dot(&dc, &dc);
    let mut lam = if cc > 1e-300 { -crate::linalg::dot(&de, &dc) / cc } else { 0.0 };
    if !lam.is_finite() {
        lam = 0.0;
    }
    let mut mu = 10.0;
    let mut c_prev = c0.abs();
    let mut iterations = 0;
    let mut inner_tol: f64 = 1e-6;
    let scale_level = level.abs().max(1.0);
    let mut out = Candidate {
        v: v.clone(),
        value: f64::INFINITY,
        c: c0,
        multiplier: lam,
        kkt: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    for _ in 0..opts.max_outer {
        let (l, m) = (lam, mu);
        let inner = minimize(
            |x, grad| {
                let mut a = vec![0.0; dim];
                let mut b = vec![0.0; dim];
                let (e, c) = layout.eval(x, level, &mut a, &mut b);
                let w = l + m * c;
                for i in 0..dim {
                    grad[i] = a[i] + w * b[i];
                }
                e + l * c + 0.5 * m * c * c
            },
            &v,
            LbfgsOptions { gtol: inner_tol, max_iters: opts.max_inner, ..Default::default() },
        );
        iterations += inner.iters;
        v = inner.x;
        let (e, c) = layout.eval(&v, level, &mut de, &mut dc);
        lam += mu * c;
        let stat: Vec<f64> = de.iter().zip(&dc).map(|(a, b)| a + lam * b).collect();
        let kkt = inf_norm(&stat) / inf_norm(&de).max(1e-12);
        out = Candidate {
            v: v.clone(),
            value: e,
            c,
            multiplier: lam,
            kkt: kkt.max(c.abs()),
            iterations,
            converged: false,
        };
        if c.abs() <= 1e-10 * scale_level && kkt <= opts.kkt_tol {
            out.converged = true;
            break;
        }
        if c.abs() > 0.25 * c_prev {
            mu = (mu * 10.0).min(1e12);
        }
        c_prev = c.abs();
        inner_tol = (inner_tol * 0.1).max(1e-13);
    }
    if !out.converged && out.c.abs() <= opts.feasibility_tol * scale_level && out.kkt <= 1e3 * opts.kkt_tol {
        out.converged = true;
    }
    out
}

/// Smallest `r >= 0` with `x(r d)` crossing `level`, searched geometrically.
fn ray_crossing(layout: &Layout, f: &[f64], g: &[f64], u: f64, level: f64) -> Option<f64> {
    let at = |r: f64| {
        let fs: Vec<f64> = f.iter().map(|x| r * x).collect();
        let gs: Vec<f64> = g.iter().map(|x| r * x).collect();
        layout.terminal(&fs, &gs, u) - level
    };
    let s0 = at(0.0);
    if s0 == 0.0 {
        return Some(0.0);
    }
    let mut prev = 0.0;
    let mut r = 1e-3;
    while r < 1e4 {
        let s = at(r);
        if s == 0.0 {
            return Some(r);
        }
        if s.signum() != s0.signum() {
            let (mut a, mut b) = (prev, r);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if at(mid).signum() == s0.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Some(b);
        }
        prev = r;
        r *= 1.3;
    }
    None
}

/// Deterministic starting points: zero, Schilder-shaped and sign flips,
/// each scaled along its ray onto the constraint.
fn starts(layout: &Layout, level: f64) -> Vec<Vec<f64>> {
    let n = layout.d.n;
    let shapes: [(f64, f64); 8] =
        [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0), (0.0, -1.0), (-1.0, 0.0)];
    let thetas: Vec<f64> = if layout.free_start() {
        vec![0.0, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2]
    } else {
        vec![0.0]
    };
    let mut out = Vec::new();
    for &theta in &thetas {
        let u = {
            let mut probe = vec![0.0; 2 * n];
            if layout.free_start() {
                probe.push(theta);
            }
            layout.unpack(&probe).u
        };
        out.push(layout.pack(&vec![0.0; n], &vec![0.0; n], theta));
        for &(a, b) in &shapes {
            let f = vec![a; n];
            let g = vec![b; n];
            let r = ray_crossing(layout, &f, &g, u, level).unwrap_or(1.0);
            let fs: Vec<f64> = f.iter().map(|x| r * x).collect();
            let gs: Vec<f64> = g.iter().map(|x| r * x).collect();
            out.push(layout.pack(&fs, &gs, theta));
        }
    }
    out
}

fn solve_equality(layout: &Layout, level: f64, opts: &SolverOptions) -> Candidate {
    let scale_level = level.abs().max(1.0);
    let mut best: Option<Candidate> = None;
    for v0 in starts(layout, level) {
        let cand = augmented_lagrangian(layout, v0, level, opts);
        let feasible = cand.c.abs() <= opts.feasibility_tol * scale_level;
        if !feasible {
            continue;
        }
        // strict improvement keeps ties on the earliest start
        let better = match &best {
            None => true,
            Some(b) => {
                (cand.converged && !b.converged)
                    || (cand.converged == b.converged && cand.value < b.value - 1e-12 * b.value.abs().max(1.0))
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.unwrap_or(Candidate {
        v: vec![0.0; layout.dim()],
        value: f64::INFINITY,
        c: f64::NAN,
        multiplier: f64::NAN,
        kkt: f64::INFINITY,
        iterations: 0,
        converged: false,
    })
}

fn assemble(layout: &Layout, cand: &Candidate, level: f64, warnings: Vec<String>) -> RateResult {
    let p = layout.unpack(&cand.v);
    let fw = layout.d.forward(&p.f, &p.g, p.u);
    let value = if cand.value.is_finite() { layout.d.energy(&p.f, &p.g) } else { f64::INFINITY };
    RateResult {
        value,
        controls: ControlVector { f: p.f, g: p.g },
        y_path: fw.y[1..].to_vec(),
        x_path: fw.x[1..].to_vec(),
        start_used: p.u,
        converged: cand.converged,
        iterations: cand.iterations,
        kkt_residual: cand.kkt,
        level_used: level,
        multiplier: cand.multiplier,
        warnings,
    }
}

/// Minimizes the control energy subject to the terminal constraint.
///
/// One-sided constraints are solved at equality on a geometric ladder of
/// levels moving away from the uncontrolled value `x_0`, stopping once the
/// value increases. A zero-control solution is returned when `x_0` is
/// already feasible.
pub fn solve(problem: &VariationalProblem, opts: &SolverOptions) -> Result<RateResult> {
    let d = Discretization::new(problem)?;
    let layout = Layout::new(&d, problem);
    let level = problem.constraint.level;
    let sense = problem.constraint.sense;
    if opts.scan_levels == 0 || opts.scan_ratio.is_nan() || opts.scan_ratio < 1.0 {
        return Err(Error::InvalidParameter("level scan needs at least one level and ratio >= 1".into()));
    }
    let n = d.n;
    let zero = vec![0.0; n];
    let (lo, hi) = problem.start.bounds();
    let samples: Vec<f64> = if hi > lo { (0..=8).map(|k| lo + (hi - lo) * k as f64 / 8.0).collect() } else { vec![lo] };
    let x0s: Vec<(f64, f64)> = samples.iter().map(|&u| (u, layout.terminal(&zero, &zero, u))).collect();
    let pick = |better: fn(f64, f64) -> bool| {
        x0s.iter().copied().fold(x0s[0], |acc, p| if better(p.1, acc.1) { p } else { acc })
    };
    let (u0, x0) = match sense {
        Sense::Ge => pick(|a, b| a > b),
        Sense::Le => pick(|a, b| a < b),
        Sense::Eq => pick(|a, b| a.abs() < b.abs()),
    };
    let satisfied = match sense {
        Sense::Ge => x0 >= level,
        Sense::Le => x0 <= level,
        Sense::Eq => x0 == level,
    };
    if satisfied {
        let fw = d.forward(&zero, &zero, u0);
        return Ok(RateResult {
            value: 0.0,
            controls: ControlVector::zeros(n),
            y_path: fw.y[1..].to_vec(),
            x_path: fw.x[1..].to_vec(),
            start_used: u0,
            converged: true,
            iterations: 0,
            kkt_residual: 0.0,
            level_used: x0,
            multiplier: 0.0,
            warnings: Vec::new(),
        });
    }
    let mut warnings = Vec::new();
    let best = if sense == Sense::Eq {
        (level, solve_equality(&layout, level, opts))
    } else {
        let k = opts.scan_levels;
        let mut best: Option<(f64, Candidate)> = None;
        let mut prev_value = f64::INFINITY;
        for j in 0..k {
            let frac = if k == 1 { 0.0 } else { j as f64 / (k - 1) as f64 };
            let lj = x0 + (level - x0) * opts.scan_ratio.powf(frac);
            let cand = solve_equality(&layout, lj, opts);
            let v = cand.value;
            if best.as_ref().is_none_or(|(_, b)| v < b.value) {
                best = Some((lj, cand));
            }
            if j > 0 && v > prev_value {
                break;
            }
            prev_value = v;
        }
        best.expect("at least one level is scanned")
    };
    let (level_used, cand) = best;
    if !cand.value.is_finite() {
        warnings.push("no feasible point found".to_string());
    } else if !cand.converged {
        warnings.push(format!("solver stopped with KKT residual {:e}", cand.kkt));
    }
    Ok(assemble(&layout, &cand, level_used, warnings))
}

/// Penalized objective `E + λ c + ½ μ c²` with `c = x(t_m) - level`, and its
/// gradient with respect to the controls and the start.
pub fn penalized_objective(
    problem: &VariationalProblem,
    controls: &ControlVector,
    start: f64,
    lambda: f64,
    mu: f64,
) -> Result<(f64, ControlVector, f64)> {
    let d = Discretization::new(problem)?;
    let n = d.n;
    for v in [&controls.f, &controls.g] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let mut df = vec![0.0; n];
    let mut dg = vec![0.0; n];
    let (xm, du) = d.terminal_with_grad(&controls.f, &controls.g, start, &mut df, &mut dg);
    let c = xm - problem.constraint.level;
    let w = lambda + mu * c;
    let mut mf = vec![0.0; n];
    let mut mg = vec![0.0; n];
    d.mass.apply(&controls.f, &mut mf);
    d.mass.apply(&controls.g, &mut mg);
    let grad = ControlVector {
        f: mf.iter().zip(&df).map(|(a, b)| a + w * b).collect(),
        g: mg.iter().zip(&dg).map(|(a, b)| a + w * b).collect(),
    };
    let value = d.energy(&controls.f, &controls.g) + lambda * c + 0.5 * mu * c * c;
    Ok((value, grad, w * du))
}
