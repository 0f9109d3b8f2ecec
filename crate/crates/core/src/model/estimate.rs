use serde::{Deserialize, Serialize};

use super::simulate::{SimOptions, SimulatedBatch, Simulator};
use super::{InitialLaw, ModelParams, RescalingScheme};
use crate::error::{ensure, Error, Result};
use crate::grid::TimeGrid;

/// Monte Carlo probability with its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub count: u64,
    pub n_paths: usize,
    pub seed: u64,
    pub event: String,
}

impl MCEstimate {
    pub fn from_count(count: u64, n_paths: usize, seed: u64, event: String) -> Self {
        let p = count as f64 / n_paths as f64;
        Self { p_hat: p, std_err: (p * (1.0 - p) / n_paths as f64).sqrt(), count, n_paths, seed, event }
    }
}

/// Fraction of paths with `X_node >= level`.
pub fn tail_probability(batch: &SimulatedBatch, level: f64, node_time: f64) -> Result<MCEstimate> {
    let node = batch.grid.nearest_node(node_time);
    let t = batch.grid.t(node);
    ensure((t - node_time).abs() <= 1e-12 * t.max(1.0), || format!("time {node_time} is not a grid node"))?;
    let count = (0..batch.n_paths).filter(|&i| batch.x_path(i)[node - 1] >= level).count() as u64;
    Ok(MCEstimate::from_count(count, batch.n_paths, batch.seed, format!("X(t={t}) >= {level}")))
}

/// One rung of an LDP ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpRow {
    pub eps: f64,
    pub speed: f64,
    pub level: f64,
    pub estimate: MCEstimate,
    /// `h_ε log p̂`, `-∞` when censored.
    pub h_log_p: f64,
    /// Delta-method standard error of `h_ε log p̂`.
    pub h_log_p_se: f64,
    pub censored: bool,
}

/// Affine extrapolation of `h_ε log p̂` to `h_ε = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpFit {
    pub rows: Vec<LdpRow>,
    pub limit: f64,
    pub limit_se: f64,
    pub slope: f64,
    pub residuals: Vec<f64>,
    /// Name of the regressor of the fit.
    pub regressor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpOptions {
    pub grid_nodes: usize,
    pub sim: SimOptions,
}

impl Default for LdpOptions {
    fn default() -> Self {
        Self { grid_nodes: 16, sim: SimOptions::default() }
    }
}

/// Estimates `P(X^ε_1 >= level)` along a ladder of `ε` and fits
/// `h_ε log p̂ = limit + slope · h_ε` by weighted least squares.
///
/// Rung `i` uses seed `seed + i`. Rungs without hits are kept in the table
/// as censored and left out of the fit.
#[allow(clippy::too_many_arguments)]
pub fn ldp_slope(
    params: &ModelParams,
    law: &InitialLaw,
    scheme: RescalingScheme,
    eps_ladder: &[f64],
    level: f64,
    n_paths: usize,
    seed: u64,
    opts: &LdpOptions,
) -> Result<LdpFit> {
    ensure(eps_ladder.len() >= 3, || "ladder needs at least three values of eps".into())?;
    ensure(n_paths >= 1, || "need at least one path".into())?;
    let grid = TimeGrid::uniform(opts.grid_nodes)?;
    let mut rows = Vec::with_capacity(eps_ladder.len());
    for (i, &eps) in eps_ladder.iter().enumerate() {
        let rung_seed = seed.wrapping_add(i as u64);
        let sim = Simulator::new(params, law, scheme, eps, &grid, opts.sim)?;
        let n = grid.len();
        let counts = sim.run(
            n_paths,
            rung_seed,
            || 0u64,
            |c, p| {
                if p.x[n] >= level {
                    *c += 1;
                }
            },
        );
        let count: u64 = counts.iter().sum();
        let est = MCEstimate::from_count(count, n_paths, rung_seed, format!("X(1) >= {level}"));
        let h = scheme.speed(eps, params.hurst);
        let censored = count == 0;
        let (h_log_p, h_log_p_se) = if censored {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (h * est.p_hat.ln(), h * est.std_err / est.p_hat)
        };
        rows.push(LdpRow { eps, speed: h, level, estimate: est, h_log_p, h_log_p_se, censored });
    }
    let used: Vec<&LdpRow> = rows.iter().filter(|r| !r.censored).collect();
    if used.len() < 2 {
        return Err(Error::Convergence(format!("only {} uncensored rungs, the fit needs two", used.len())));
    }
    let (limit, slope, limit_se, _) = weighted_line(
        &used.iter().map(|r| r.speed).collect::<Vec<_>>(),
        &used.iter().map(|r| r.h_log_p).collect::<Vec<_>>(),
        &used.iter().map(|r| r.h_log_p_se).collect::<Vec<_>>(),
    );
    let residuals =
        rows.iter().map(|r| if r.censored { f64::NAN } else { r.h_log_p - (limit + slope * r.speed) }).collect();
    Ok(LdpFit { rows, limit, limit_se, slope, residuals, regressor: "speed".into() })
}

/// Weighted least squares for `y = a + b x` with known standard errors.
/// Returns `(a, b, se(a), se(b))`.
pub(crate) fn weighted_line(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64, f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(se) {
        let w = if si > 0.0 { 1.0 / (si * si) } else { 1e30 };
        sw += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let det = sw * sxx - sx * sx;
    let b = (sw * sxy - sx * sy) / det;
    let a = (sy - b * sx) / sw;
    (a, b, (sxx / det).sqrt(), (sw / det).sqrt())
}
