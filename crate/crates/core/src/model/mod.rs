//! The randomised fractional Stein-Stein model
//!
//! ```text
//! dX_t = -½ σ(Y_t)² dt + σ(Y_t) (ρ dB_t + ρ̄ dB⊥_t),   X_0 = 0
//! dY_t = (λ + β Y_t) dt + ξ dW^H_t,                   Y_0 ~ Θ
//! ```
//!
//! its rescalings, starting laws, Monte Carlo estimators and assumption audits.

mod audit;
mod estimate;
mod law;
mod simulate;
mod vol;

pub use audit::{check_scaling_assumption, check_theta_assumption, ScalingReport, ThetaReport, ThetaVerdict};
pub(crate) use estimate::weighted_line;
pub use estimate::{ldp_slope, tail_probability, LdpFit, LdpOptions, LdpRow, MCEstimate};
pub use law::{sample_initial, InitialLaw};
pub use simulate::{simulate, PathView, SimOptions, SimulatedBatch, Simulator, VolMode};
pub use vol::{VolFunction, VolShape};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::kernels::Hurst;

/// Coefficients of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub lambda: f64,
    pub beta: f64,
    pub xi: f64,
    pub rho: f64,
    pub hurst: Hurst,
    pub vol: VolFunction,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.lambda >= 0.0 && self.lambda.is_finite(), || {
            format!("lambda must be non-negative, got {}", self.lambda)
        })?;
        ensure(self.beta < 0.0 && self.beta.is_finite(), || format!("beta must be negative, got {}", self.beta))?;
        ensure(self.xi >= 0.0 && self.xi.is_finite(), || format!("xi must be non-negative, got {}", self.xi))?;
        ensure(self.rho > -1.0 && self.rho < 1.0, || format!("rho must lie in (-1, 1), got {}", self.rho))?;
        self.vol.validate()
    }

    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

/// Which rescaled system to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RescalingScheme {
    /// Large-deviation tails, speed `ε^{2b}`.
    Tails { b: f64 },
    /// Small time with a scaled start, speed `ε^{4H+2b}`.
    SmallTime { b: f64 },
    /// Small time for the Markovian (`H = 1/2`) system with an unscaled
    /// start, speed `ε²`.
    DiffusiveSmallTime,
}

impl RescalingScheme {
    pub fn b(&self) -> f64 {
        match *self {
            RescalingScheme::Tails { b } | RescalingScheme::SmallTime { b } => b,
            RescalingScheme::DiffusiveSmallTime => 0.0,
        }
    }

    /// Exponent `e` with speed `h_ε = ε^e`.
    pub fn speed_exponent(&self, hurst: Hurst) -> f64 {
        match *self {
            RescalingScheme::Tails { b } => 2.0 * b,
            RescalingScheme::SmallTime { b } => 4.0 * hurst.value() + 2.0 * b,
            RescalingScheme::DiffusiveSmallTime => 2.0,
        }
    }

    pub fn speed(&self, eps: f64, hurst: Hurst) -> f64 {
        eps.powf(self.speed_exponent(hurst))
    }

    /// The constraint on `b` needed for the X-LDP, as an error message.
    pub fn check_b(&self, hurst: Hurst) -> std::result::Result<(), String> {
        match *self {
            RescalingScheme::Tails { b } if b < 0.5 => Err(format!("tails scheme needs b >= 1/2, got {b}")),
            RescalingScheme::SmallTime { b } if b < 0.5 - 2.0 * hurst.value() => {
                Err(format!("small-time scheme needs b >= 1/2 - 2H = {}, got {b}", 0.5 - 2.0 * hurst.value()))
            }
            RescalingScheme::Tails { b } | RescalingScheme::SmallTime { b } if !b.is_finite() => {
                Err(format!("b must be finite, got {b}"))
            }
            _ => Ok(()),
        }
    }
}
