use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{ensure, Error, Result};
use crate::rng::map_batches;
use crate::special::norm_cdf;

/// Distribution `Θ` of the volatility starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Point {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
    /// Gaussian conditioned on `|x - mean| <= radius · sd`.
    TruncGaussian {
        mean: f64,
        var: f64,
        radius: f64,
    },
    /// Law of the Stein-Stein volatility at time `t` started from `sigma0`.
    ForwardSteinStein {
        sigma0: f64,
        t: f64,
    },
}

impl InitialLaw {
    /// Replaces a forward Stein-Stein law by its Gaussian equivalent.
    pub fn resolve(&self, params: Option<&ModelParams>) -> Result<InitialLaw> {
        match *self {
            InitialLaw::ForwardSteinStein { sigma0, t } => {
                let p = params
                    .ok_or_else(|| Error::InvalidParameter("forward Stein-Stein law needs model parameters".into()))?;
                ensure(t > 0.0, || format!("forward time must be positive, got {t}"))?;
                let (beta, lambda, xi) = (p.beta, p.lambda, p.xi);
                let growth = (beta * t).exp();
                let mean = growth * (sigma0 + lambda / beta) - lambda / beta;
                let var = xi * xi * (2.0 * beta * t).exp_m1() / (2.0 * beta);
                Ok(InitialLaw::Gaussian { mean, var })
            }
            other => {
                other.validate()?;
                Ok(other)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialLaw::Point { value } => ensure(value.is_finite(), || "non-finite point".into()),
            InitialLaw::Uniform { lo, hi } => ensure(lo.is_finite() && hi.is_finite() && lo <= hi, || {
                format!("uniform support [{lo}, {hi}] is empty")
            }),
            InitialLaw::Gaussian { mean, var } => {
                ensure(mean.is_finite() && var >= 0.0, || format!("invalid gaussian mean {mean}, variance {var}"))
            }
            InitialLaw::TruncGaussian { mean, var, radius } => {
                ensure(mean.is_finite() && var >= 0.0 && radius > 0.0, || {
                    format!("invalid truncated gaussian ({mean}, {var}, {radius})")
                })
            }
            InitialLaw::ForwardSteinStein { t, .. } => {
                ensure(t > 0.0, || format!("forward time must be positive, got {t}"))
            }
        }
    }

    /// Support as a closed interval, if bounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            InitialLaw::Point { value } => Some((value, value)),
            InitialLaw::Uniform { lo, hi } => Some((lo, hi)),
            InitialLaw::TruncGaussian { mean, var, radius } => {
                let r = radius * var.sqrt();
                Some((mean - r, mean + r))
            }
            _ => None,
        }
    }

    /// One draw. The law must already be resolved.
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::Point { value } => value,
            InitialLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            InitialLaw::Gaussian { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + var.sqrt() * z
            }
            InitialLaw::TruncGaussian { mean, var, radius } => {
                mean + var.sqrt() * truncated_standard_normal(radius, rng)
            }
            InitialLaw::ForwardSteinStein { .. } => {
                unreachable!("forward laws are resolved before sampling")
            }
        }
    }
}

/// Exact draw from `N(0,1)` conditioned on `|z| <= r`.
fn truncated_standard_normal<R: Rng + ?Sized>(r: f64, rng: &mut R) -> f64 {
    if r >= 1.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= r {
                return z;
            }
        }
    }
    // uniform proposal on [-r, r], accepted with probability e^{-z²/2} >= e^{-1/2}
    loop {
        let z = r * (2.0 * rng.random::<f64>() - 1.0);
        if rng.random::<f64>() <= (-0.5 * z * z).exp() {
            return z;
        }
    }
}

/// Mass of `N(0,1)` on `[-r, r]`.
pub(crate) fn central_mass(r: f64) -> f64 {
    norm_cdf(r) - norm_cdf(-r)
}

/// `n` independent draws, reproducible under `seed`.
pub fn sample_initial(law: &InitialLaw, params: Option<&ModelParams>, n: usize, seed: u64) -> Result<Vec<f64>> {
    let law = law.resolve(params)?;
    law.validate()?;
    let chunks = map_batches(n, seed, |rng, range| range.map(|_| law.draw(rng)).collect::<Vec<_>>());
    Ok(chunks.concat())
}
