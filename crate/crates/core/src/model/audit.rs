use serde::{Deserialize, Serialize};

use super::law::central_mass;
use super::{InitialLaw, RescalingScheme, VolFunction};
use crate::error::{Error, Result};
use crate::kernels::Hurst;
use crate::special::{log_add_exp, log_norm_sf, norm_cdf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// `(ε, max_y |ε^b σ(y/ε^b) - σ̃(y)|)`.
    pub deviations: Vec<(f64, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Audits the scaling property `ε^b σ(y/ε^b) → σ̃(y)` on a lattice.
///
/// Passes when the deviations do not increase as `ε` decreases and the last
/// one is below `tolerance`.
pub fn check_scaling_assumption(
    vol: &VolFunction,
    eps_ladder: &[f64],
    lattice: &[f64],
    tolerance: f64,
) -> ScalingReport {
    let mut ladder = eps_ladder.to_vec();
    ladder.sort_by(|a, b| b.total_cmp(a));
    let deviations: Vec<(f64, f64)> = ladder
        .iter()
        .map(|&eps| {
            let dev = lattice.iter().map(|&y| (vol.scaled(eps, y) - vol.sigma_tilde.eval(y)).abs()).fold(0.0, f64::max);
            (eps, dev)
        })
        .collect();
    let monotone = deviations.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12));
    let last = deviations.last().map_or(0.0, |d| d.1);
    ScalingReport { deviations, tolerance, pass: monotone && last <= tolerance }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ThetaVerdict {
    DivergesToMinusInfinity,
    Stalls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    /// `(ε, h_ε log P(ε^b |Θ| > 1))`.
    pub values: Vec<(f64, f64)>,
    pub verdict: ThetaVerdict,
    /// Finite limit of the sequence when it stalls.
    pub limit: Option<f64>,
}

/// `ln P(|Θ| > c)` for the laws with analytic tails.
fn log_tail(law: &InitialLaw, c: f64) -> Result<f64> {
    let p = match *law {
        InitialLaw::Point { value } => return Ok(if value.abs() > c { 0.0 } else { f64::NEG_INFINITY }),
        InitialLaw::Uniform { lo, hi } => {
            if hi == lo {
                return Ok(if lo.abs() > c { 0.0 } else { f64::NEG_INFINITY });
            }
            let above = (hi - lo.max(c)).max(0.0);
            let below = (hi.min(-c) - lo).max(0.0);
            (above + below) / (hi - lo)
        }
        InitialLaw::Gaussian { mean, var } => {
            let sd = var.sqrt();
            if sd == 0.0 {
                return Ok(if mean.abs() > c { 0.0 } else { f64::NEG_INFINITY });
            }
            return Ok(log_add_exp(log_norm_sf((c - mean) / sd), log_norm_sf((c + mean) / sd)));
        }
        InitialLaw::TruncGaussian { mean, var, radius } => {
            let sd = var.sqrt();
            let (lo, hi) = (mean - radius * sd, mean + radius * sd);
            if sd == 0.0 || c >= hi.abs().max(lo.abs()) {
                return Ok(f64::NEG_INFINITY);
            }
            let cdf = |x: f64| norm_cdf((x.clamp(lo, hi) - mean) / sd);
            let mass = (cdf(hi) - cdf(c)).max(0.0) + (cdf(-c) - cdf(lo)).max(0.0);
            mass / central_mass(radius)
        }
        InitialLaw::ForwardSteinStein { .. } => {
            return Err(Error::InvalidParameter("forward Stein-Stein law must be resolved to a Gaussian first".into()))
        }
    };
    Ok(if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
}

/// Audits `h_ε log P(ε^b |Θ| > 1) → -∞` analytically.
pub fn check_theta_assumption(
    law: &InitialLaw,
    scheme: RescalingScheme,
    hurst: Hurst,
    eps_ladder: &[f64],
) -> Result<ThetaReport> {
    law.validate()?;
    let b = scheme.b();
    let e = scheme.speed_exponent(hurst);
    let values = eps_ladder
        .iter()
        .map(|&eps| {
            let lt = log_tail(law, eps.powf(-b))?;
            Ok((eps, if lt == f64::NEG_INFINITY { lt } else { eps.powf(e) * lt }))
        })
        .collect::<Result<Vec<_>>>()?;
    let (verdict, limit) = match *law {
        InitialLaw::Gaussian { var, .. } if var > 0.0 => {
            // h_ε log P ~ -ε^{e - 2b} / (2 var)
            let gap = e - 2.0 * b;
            if gap < 0.0 {
                (ThetaVerdict::DivergesToMinusInfinity, None)
            } else if gap == 0.0 {
                (ThetaVerdict::Stalls, Some(-0.5 / var))
            } else {
                (ThetaVerdict::Stalls, Some(0.0))
            }
        }
        _ => {
            let (lo, hi) = law.support().expect("remaining laws are bounded");
            let sup = lo.abs().max(hi.abs());
            if b > 0.0 || sup <= 1.0 {
                (ThetaVerdict::DivergesToMinusInfinity, None)
            } else {
                (ThetaVerdict::Stalls, Some(0.0))
            }
        }
    };
    Ok(ThetaReport { values, verdict, limit })
}
