//! Implied-volatility limits from rate infima, and Monte Carlo smiles to
//! check them against.
//!
//! * large strike: `Σ²_t(k) t / k → ½ / inf_{y ≥ 1} Λ̃`
//! * small time: `t^b Σ²_t(t^{½-H-b} k) → k² / (2 inf_{x ≥ k} 𝙸)`
//! * forward smile: `Σ²_{t,τ}(k) → k² / (2 inf I^α)` as `τ ↓ 0`

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::grid::TimeGrid;
use crate::model::{
    check_theta_assumption, weighted_line, InitialLaw, ModelParams, RescalingScheme, SimOptions, Simulator,
    ThetaVerdict, VolMode,
};
use crate::rates::{rate_with_random_start, smalltime_rate, tail_rate, RateOptions, RateResult};
use crate::rng::stream_rng;
use crate::special::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmileKind {
    TailSlope {
        t: f64,
    },
    SmallTime {
        k: f64,
        b: f64,
    },
    Forward {
        k: f64,
        t: f64,
        sigma0: f64,
        #[serde(default = "default_radius")]
        radius: f64,
    },
}

pub fn default_radius() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmileQuery {
    pub kind: SmileKind,
    pub params: ModelParams,
    /// Starting law, checked against the tails assumption when present.
    #[serde(default)]
    pub law: Option<InitialLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileResult {
    pub kind: SmileKind,
    pub limit_value: f64,
    pub rate_used: RateResult,
    pub formula: String,
    /// `b` in the explosion rate `t^{-b}` of small-time smiles.
    pub explosion_exponent: Option<f64>,
    /// Truncated support of the forward starting law.
    pub support: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl SmileResult {
    /// Recomputes the limit from the embedded rate.
    pub fn recompute(&self) -> f64 {
        let numer = match self.kind {
            SmileKind::TailSlope { .. } => 0.5,
            SmileKind::SmallTime { k, .. } | SmileKind::Forward { k, .. } => 0.5 * k * k,
        };
        limit_from_rate(numer, self.rate_used.value)
    }
}

fn limit_from_rate(numer: f64, rate: f64) -> f64 {
    if rate == 0.0 {
        f64::INFINITY
    } else {
        numer / rate
    }
}

fn build(kind: SmileKind, rate: RateResult, formula: &str, support: Option<(f64, f64)>) -> SmileResult {
    let mut warnings = rate.warnings.clone();
    if rate.value == 0.0 {
        warnings.push("rate is zero; the limit is reported as +inf".into());
    } else if rate.value.is_infinite() {
        warnings.push("rate is infinite; the limit is reported as 0".into());
    }
    let explosion_exponent = match kind {
        SmileKind::SmallTime { b, .. } => Some(b),
        _ => None,
    };
    let mut out = SmileResult {
        kind,
        limit_value: 0.0,
        rate_used: rate,
        formula: formula.into(),
        explosion_exponent,
        support,
        warnings,
    };
    out.limit_value = out.recompute();
    out
}

/// Large-strike slope `lim Σ²_t(k) t / k`. Does not depend on the starting
/// law.
pub fn tail_smile_slope(params: &ModelParams, b: f64, t: f64, opts: &RateOptions) -> Result<SmileResult> {
    ensure(t > 0.0 && t <= 1.0, || format!("t must lie in (0, 1], got {t}"))?;
    let opts = RateOptions { terminal_time: Some(t), ..opts.clone() };
    let rate = tail_rate(params, 1.0, b, &opts)?;
    Ok(build(SmileKind::TailSlope { t }, rate, "1/(2*rate)", None))
}

/// [`tail_smile_slope`] after checking that `law` has tails negligible at the
/// tails speed.
pub fn tail_smile_slope_for_law(
    params: &ModelParams,
    law: &InitialLaw,
    b: f64,
    t: f64,
    opts: &RateOptions,
) -> Result<SmileResult> {
    let law = law.resolve(Some(params))?;
    let report = check_theta_assumption(&law, RescalingScheme::Tails { b }, params.hurst, &[0.5, 0.1, 0.01, 1e-3])?;
    if report.verdict != ThetaVerdict::DivergesToMinusInfinity {
        return Err(Error::Assumption(format!("starting law {law:?} has heavy tails at the tails speed")));
    }
    tail_smile_slope(params, b, t, opts)
}

/// Small-time limit `lim t^b Σ²_t(t^{½-H-b} k)`.
pub fn smalltime_smile(params: &ModelParams, k: f64, b: f64, opts: &RateOptions) -> Result<SmileResult> {
    ensure(k != 0.0 && k.is_finite(), || format!("k must be non-zero, got {k}"))?;
    let rate = smalltime_rate(params, k, b, opts)?;
    Ok(build(SmileKind::SmallTime { k, b }, rate, "k^2/(2*rate)", None))
}

/// Small-time forward smile started from the law of the volatility at `t`,
/// truncated to `mean ± radius · sd`.
pub fn forward_smile(
    params: &ModelParams,
    sigma0: f64,
    t: f64,
    k: f64,
    radius: f64,
    opts: &RateOptions,
) -> Result<SmileResult> {
    ensure(t > 0.0, || format!("forward time must be positive, got {t}"))?;
    ensure(radius >= 0.0 && radius.is_finite(), || format!("radius must be non-negative, got {radius}"))?;
    ensure(k != 0.0 && k.is_finite(), || format!("k must be non-zero, got {k}"))?;
    let support = forward_support(params, sigma0, t, radius)?;
    let rate = rate_with_random_start(params, k, support, opts)?;
    Ok(build(SmileKind::Forward { k, t, sigma0, radius }, rate, "k^2/(2*rate)", Some(support)))
}

/// `mean ± radius · sd` of the volatility at `t` started from `sigma0`.
pub fn forward_support(params: &ModelParams, sigma0: f64, t: f64, radius: f64) -> Result<(f64, f64)> {
    let law = InitialLaw::ForwardSteinStein { sigma0, t };
    match law.resolve(Some(params))? {
        InitialLaw::Gaussian { mean, var } => {
            let r = radius * var.sqrt();
            Ok((mean - r, mean + r))
        }
        other => unreachable!("forward law resolved to {other:?}"),
    }
}

pub fn evaluate(query: &SmileQuery, opts: &RateOptions) -> Result<SmileResult> {
    let p = &query.params;
    match query.kind {
        SmileKind::TailSlope { t } => match &query.law {
            Some(law) => tail_smile_slope_for_law(p, law, p.vol.b, t, opts),
            None => tail_smile_slope(p, p.vol.b, t, opts),
        },
        SmileKind::SmallTime { k, b } => smalltime_smile(p, k, b, opts),
        SmileKind::Forward { k, t, sigma0, radius } => forward_smile(p, sigma0, t, k, radius, opts),
    }
}

/// Undiscounted call on a forward with total standard deviation `s = σ√T`.
fn call_total(forward: f64, strike: f64, s: f64) -> f64 {
    let intrinsic = (forward - strike).max(0.0);
    if s <= 0.0 {
        return intrinsic;
    }
    intrinsic + time_value(forward, strike, s)
}

/// Price of the out-of-the-money option, free of cancellation against the
/// intrinsic value.
fn time_value(forward: f64, strike: f64, s: f64) -> f64 {
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    let d2 = d1 - s;
    if forward <= strike {
        forward * norm_cdf(d1) - strike * norm_cdf(d2)
    } else {
        strike * norm_cdf(-d2) - forward * norm_cdf(-d1)
    }
}

/// Black-Scholes call price on a forward.
pub fn bs_price(forward: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    call_total(forward, strike, vol * maturity.sqrt())
}

/// Black-Scholes implied volatility of an undiscounted call.
pub fn bs_implied_vol(price: f64, forward: f64, strike: f64, maturity: f64) -> Result<f64> {
    ensure(forward > 0.0 && strike > 0.0 && maturity > 0.0, || {
        format!("need positive forward, strike and maturity, got ({forward}, {strike}, {maturity})")
    })?;
    let intrinsic = (forward - strike).max(0.0);
    if !(price >= intrinsic && price < forward) {
        return Err(Error::Domain(format!(
            "call price {price} outside the no-arbitrage range [{intrinsic}, {forward})"
        )));
    }
    let target = price - intrinsic;
    if target <= 0.0 {
        return Ok(0.0);
    }
    let log_target = target.ln();
    let g = |s: f64| time_value(forward, strike, s).max(0.0).ln() - log_target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Convergence(format!("no volatility reproduces price {price}")));
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gs = g(s);
        if gs == 0.0 {
            break;
        }
        if gs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        // Newton on the log time value: d/ds ln tv = F φ(d1) / tv
        let d1 = (forward / strike).ln() / s + 0.5 * s;
        let tv = time_value(forward, strike, s);
        let step = gs * tv / (forward * norm_pdf(d1));
        let next = s - step;
        s = if next.is_finite() && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-14 * hi.max(1.0) || step.abs() < 1e-15 * s.max(1e-300) {
            break;
        }
    }
    Ok(s / maturity.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSmileOptions {
    pub grid_nodes: usize,
    pub bootstrap: usize,
}

impl Default for McSmileOptions {
    fn default() -> Self {
        Self { grid_nodes: 32, bootstrap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSmileRow {
    /// Log-strike.
    pub k: f64,
    pub price: f64,
    pub price_se: f64,
    pub implied_vol: f64,
    /// Bootstrap standard deviation of the implied volatility.
    pub error_bar: f64,
    /// The price sits at its intrinsic bound; the volatility is reported as 0.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSmile {
    pub t: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub rows: Vec<McSmileRow>,
}

/// Monte Carlo smile of the unscaled model at maturity `t` for log-strikes
/// `strikes`.
///
/// Prices are conditional on the volatility path: given `B`, the log-price
/// is Gaussian, so each path contributes a Black-Scholes price.
pub fn mc_smile(
    params: &ModelParams,
    law: &InitialLaw,
    t: f64,
    strikes: &[f64],
    n_paths: usize,
    seed: u64,
    opts: &McSmileOptions,
) -> Result<McSmile> {
    ensure(t > 0.0 && t.is_finite(), || format!("maturity must be positive, got {t}"))?;
    ensure(n_paths >= 2, || "need at least two paths".into())?;
    ensure(strikes.iter().all(|k| k.is_finite()), || "non-finite strike".into())?;
    let grid = TimeGrid::uniform_horizon(opts.grid_nodes, t)?;
    let sim_opts = SimOptions { vol_mode: VolMode::Scaled, allow_coarse_grid: false, allow_scheme_violation: true };
    let sim = Simulator::new(params, law, RescalingScheme::Tails { b: params.vol.b }, 1.0, &grid, sim_opts)?;
    let widths = grid.panel_widths();
    let (rho, rho_bar) = (params.rho, params.rho_bar());
    let m = strikes.len();
    let parts = sim.run(n_paths, seed, Vec::new, |acc: &mut Vec<f64>, p| {
        let (mut log_fwd, mut var) = (0.0, 0.0);
        for ((s, db), w) in p.vol.iter().zip(p.db).zip(&widths) {
            log_fwd += rho * s * db - 0.5 * rho * rho * s * s * w;
            var += s * s * w;
        }
        let (fwd, sd) = (log_fwd.exp(), rho_bar * var.sqrt());
        acc.extend(strikes.iter().map(|k| call_total(fwd, k.exp(), sd)));
    });
    let prices: Vec<f64> = parts.concat();
    let n = n_paths as f64;
    let mut mean = vec![0.0; m];
    let mut sq = vec![0.0; m];
    for row in prices.chunks(m) {
        for j in 0..m {
            mean[j] += row[j] / n;
            sq[j] += row[j] * row[j] / n;
        }
    }
    let implied =
        |price: f64, k: f64| -> Option<f64> { bs_implied_vol(price, 1.0, k.exp(), t).ok().filter(|v| *v > 0.0) };

    let mut rng = stream_rng(seed, 0);
    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(opts.bootstrap); m];
    for _ in 0..opts.bootstrap {
        let mut sums = vec![0.0; m];
        for _ in 0..n_paths {
            let i = rand::Rng::random_range(&mut rng, 0..n_paths);
            for j in 0..m {
                sums[j] += prices[i * m + j];
            }
        }
        for j in 0..m {
            if let Some(v) = implied(sums[j] / n, strikes[j]) {
                boot[j].push(v);
            }
        }
    }
    let rows = (0..m)
        .map(|j| {
            let k = strikes[j];
            let var = (sq[j] - mean[j] * mean[j]).max(0.0) * n / (n - 1.0);
            let vol = implied(mean[j], k);
            let b = &boot[j];
            let error_bar = if b.len() >= 2 {
                let bm = b.iter().sum::<f64>() / b.len() as f64;
                (b.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (b.len() - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            McSmileRow {
                k,
                price: mean[j],
                price_se: (var / n).sqrt(),
                implied_vol: vol.unwrap_or(0.0),
                error_bar,
                censored: vol.is_none(),
            }
        })
        .collect();
    Ok(McSmile { t, n_paths, seed, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionRow {
    pub t: f64,
    /// Rescaled log-strike `t^{½-H-b} k`.
    pub k: f64,
    pub implied_vol: f64,
    pub error_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionFit {
    pub rows: Vec<ExplosionRow>,
    /// Fitted slope of `log Σ²` against `log t`.
    pub slope: f64,
    pub slope_se: f64,
    /// `-b`.
    pub predicted: f64,
}

/// Regresses `log Σ²_t(t^{½-H-b} k)` on `log t` over the maturities `ts`.
/// Maturity `i` uses seed `seed + i`.
#[allow(clippy::too_many_arguments)]
pub fn fit_explosion(
    params: &ModelParams,
    law: &InitialLaw,
    b: f64,
    k: f64,
    ts: &[f64],
    n_paths: usize,
    seed: u64,
    opts: &McSmileOptions,
) -> Result<ExplosionFit> {
    ensure(ts.len() >= 2, || "need at least two maturities".into())?;
    let h = params.hurst.value();
    let mut rows = Vec::with_capacity(ts.len());
    for (i, &t) in ts.iter().enumerate() {
        let kt = t.powf(0.5 - h - b) * k;
        let smile = mc_smile(params, law, t, &[kt], n_paths, seed.wrapping_add(i as u64), opts)?;
        let r = &smile.rows[0];
        if r.censored {
            return Err(Error::Convergence(format!("price at t = {t} is at its intrinsic bound")));
        }
        rows.push(ExplosionRow { t, k: kt, implied_vol: r.implied_vol, error_bar: r.error_bar });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.t.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 2.0 * r.implied_vol.ln()).collect();
    let se: Vec<f64> = rows
        .iter()
        .map(|r| {
            let s = 2.0 * r.error_bar / r.implied_vol;
            if s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    let (_, slope, _, slope_se) = weighted_line(&x, &y, &se);
    Ok(ExplosionFit { rows, slope, slope_se, predicted: -b })
}
