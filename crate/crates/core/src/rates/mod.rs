//! Discretized rate functions: minimal Cameron-Martin energy of controls
//! `(f, g)` whose image under the controlled system reaches a terminal level.
//!
//! Given controls and a start `u`, the candidate paths are
//!
//! ```text
//! y(t) = u h(t) + ∫_0^t Φ(t, s) f(s) ds
//! x(t) = -½ D ∫_0^t σ̃(y)² ds + ∫_0^t σ̃(y) (ρ f + ρ̄ g) ds
//! ```
//!
//! with `h(t) = e^{βt}` or `1` and `D ∈ {0, 1}` the drift flag. The rate is
//! `inf ½ (‖f‖² + ‖g‖²)` subject to `x(t_m) ⋛ level`.
//!
//! Controls are piecewise linear between grid nodes and extended linearly
//! over the first panel `[0, t_1]`.

mod brute;
mod discretization;
mod lbfgs;
mod solver;

pub use brute::{brute_force_rate, BruteForceResult};
pub use discretization::{l2_energy, path_from_controls};
pub use lbfgs::{minimize, LbfgsOptions, LbfgsOutcome};
pub use solver::{penalized_objective, solve, SolverOptions};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::grid::TimeGrid;
use crate::kernels::{Hurst, KernelSpec};
use crate::model::{ModelParams, VolShape};

/// Controls on the grid nodes: `f` drives `B` (and `W^H`), `g` drives `B⊥`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ControlVector {
    pub fn zeros(n: usize) -> Self {
        Self { f: vec![0.0; n], g: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    Fixed { u: f64 },
    Interval { lo: f64, hi: f64 },
}

impl StartSpec {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            StartSpec::Fixed { u } => (u, u),
            StartSpec::Interval { lo, hi } => (lo, hi),
        }
    }
}

/// How the start propagates in the absence of controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartResponse {
    /// `u e^{βt}`
    Exponential { beta: f64 },
    /// `u`
    Constant,
}

impl StartResponse {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            StartResponse::Exponential { beta } => (beta * t).exp(),
            StartResponse::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Ge,
    Eq,
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalConstraint {
    pub level: f64,
    pub sense: Sense,
    /// 1-based grid node carrying the constraint; the last node if absent.
    #[serde(default)]
    pub node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationalProblem {
    pub kernel: KernelSpec,
    pub vol: VolShape,
    pub rho: f64,
    pub include_drift: bool,
    pub start: StartSpec,
    pub start_response: StartResponse,
    pub constraint: TerminalConstraint,
    pub grid: TimeGrid,
}

impl VariationalProblem {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.vol.validate()?;
        ensure(self.rho >= -1.0 && self.rho <= 1.0, || format!("rho must lie in [-1, 1], got {}", self.rho))?;
        let (lo, hi) = self.start.bounds();
        ensure(lo.is_finite() && hi.is_finite() && lo <= hi, || format!("start interval [{lo}, {hi}] is empty"))?;
        ensure(self.constraint.level.is_finite(), || "level must be finite".into())?;
        if let Some(m) = self.constraint.node {
            ensure(m >= 1 && m <= self.grid.len(), || format!("terminal node {m} is off the grid"))?;
        }
        Ok(())
    }

    pub fn terminal_node(&self) -> usize {
        self.constraint.node.unwrap_or(self.grid.len())
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        let mut p = self.clone();
        if let Some(m) = p.constraint.node {
            p.constraint.node = Some(grid.nearest_node(self.grid.t(m)));
        }
        p.grid = grid;
        p
    }

    pub fn with_level(&self, level: f64, sense: Sense) -> Self {
        let mut p = self.clone();
        p.constraint.level = level;
        p.constraint.sense = sense;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub value: f64,
    pub controls: ControlVector,
    pub y_path: Vec<f64>,
    pub x_path: Vec<f64>,
    pub start_used: f64,
    pub converged: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Terminal level at which the equality constraint was active.
    pub level_used: f64,
    pub multiplier: f64,
    pub warnings: Vec<String>,
}

/// Options shared by the model-level rate builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateOptions {
    pub grid_nodes: usize,
    /// Time carrying the constraint; the grid then spans `[0, t]`. The
    /// horizon is 1 if absent.
    pub terminal_time: Option<f64>,
    /// Overrides the default drift setting of the problem family.
    pub include_drift: Option<bool>,
    pub solver: SolverOptions,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { grid_nodes: 48, terminal_time: None, include_drift: None, solver: SolverOptions::default() }
    }
}

fn sense_for(level: f64) -> Sense {
    if level < 0.0 {
        Sense::Le
    } else {
        Sense::Ge
    }
}

fn finish(problem: VariationalProblem, opts: &RateOptions, warning: Option<String>) -> Result<RateResult> {
    let mut problem = problem;
    if let Some(t) = opts.terminal_time {
        ensure(t > 0.0 && t.is_finite(), || format!("terminal time must be positive, got {t}"))?;
        problem.grid = TimeGrid::uniform_horizon(opts.grid_nodes, t)?;
    }
    let mut result = solve(&problem, &opts.solver)?;
    result.warnings.extend(warning);
    Ok(result)
}

/// Tail rate `inf_{y >= level} Λ̃`: kernel `F^H`, drift on, start 0.
pub fn tail_rate(params: &ModelParams, y_level: f64, b: f64, opts: &RateOptions) -> Result<RateResult> {
    params.validate()?;
    let warning = (b < 0.5).then(|| format!("b = {b} < 1/2: the tails LDP is not covered"));
    let problem = VariationalProblem {
        kernel: KernelSpec::FFou { hurst: params.hurst, beta: params.beta, xi: params.xi },
        vol: params.vol.sigma_tilde.clone(),
        rho: params.rho,
        include_drift: opts.include_drift.unwrap_or(true),
        start: StartSpec::Fixed { u: 0.0 },
        start_response: StartResponse::Exponential { beta: params.beta },
        constraint: TerminalConstraint { level: y_level, sense: sense_for(y_level), node: None },
        grid: TimeGrid::uniform(opts.grid_nodes)?,
    };
    finish(problem, opts, warning)
}

/// Small-time rate `inf_{x >= k} 𝙸` (or `<= k` for `k < 0`): kernel `G_0`,
/// no drift, start 0.
pub fn smalltime_rate(params: &ModelParams, k_level: f64, b: f64, opts: &RateOptions) -> Result<RateResult> {
    params.validate()?;
    let bound = 0.5 - 2.0 * params.hurst.value();
    let warning = (b < bound).then(|| format!("b = {b} < 1/2 - 2H = {bound}: the small-time LDP is not covered"));
    let problem = VariationalProblem {
        kernel: KernelSpec::GZero { hurst: params.hurst, xi: params.xi },
        vol: params.vol.sigma_tilde.clone(),
        rho: params.rho,
        include_drift: false,
        start: StartSpec::Fixed { u: 0.0 },
        start_response: StartResponse::Constant,
        constraint: TerminalConstraint { level: k_level, sense: sense_for(k_level), node: None },
        grid: TimeGrid::uniform(opts.grid_nodes)?,
    };
    finish(problem, opts, warning)
}

/// Small-time rate of the Markovian system with the start free in a compact
/// support.
pub fn rate_with_random_start(
    params: &ModelParams,
    k_level: f64,
    support: (f64, f64),
    opts: &RateOptions,
) -> Result<RateResult> {
    params.validate()?;
    let (lo, hi) = support;
    let start = if lo == hi { StartSpec::Fixed { u: lo } } else { StartSpec::Interval { lo, hi } };
    let problem = VariationalProblem {
        kernel: KernelSpec::GZero { hurst: Hurst::new(0.5)?, xi: params.xi },
        vol: params.vol.sigma_tilde.clone(),
        rho: params.rho,
        include_drift: false,
        start,
        start_response: StartResponse::Constant,
        constraint: TerminalConstraint { level: k_level, sense: sense_for(k_level), node: None },
        grid: TimeGrid::uniform(opts.grid_nodes)?,
    };
    finish(problem, opts, None)
}
