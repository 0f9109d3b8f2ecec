use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// A scalar volatility shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolShape {
    /// `y ↦ y`
    Linear,
    /// `y ↦ c`
    Constant { c: f64 },
    /// `y ↦ c0 + c1 |y|`
    AffineAbs { c0: f64, c1: f64 },
    /// Piecewise-linear interpolation of `(ys, values)`, extended linearly
    /// beyond the end points.
    Tabulated { ys: Vec<f64>, values: Vec<f64> },
}

impl VolShape {
    pub fn validate(&self) -> Result<()> {
        match self {
            VolShape::Linear => Ok(()),
            VolShape::Constant { c } => ensure(c.is_finite(), || "constant must be finite".into()),
            VolShape::AffineAbs { c0, c1 } => {
                ensure(c0.is_finite() && c1.is_finite(), || "coefficients must be finite".into())
            }
            VolShape::Tabulated { ys, values } => {
                ensure(ys.len() >= 2 && ys.len() == values.len(), || {
                    "tabulated shape needs at least two matching points".into()
                })?;
                ensure(ys.windows(2).all(|w| w[1] > w[0]), || "tabulated abscissae must be increasing".into())?;
                ensure(values.iter().all(|v| v.is_finite()), || "non-finite table value".into())
            }
        }
    }

    fn segment(ys: &[f64], y: f64) -> usize {
        let k = ys.partition_point(|&x| x <= y);
        k.clamp(1, ys.len() - 1) - 1
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            VolShape::Linear => y,
            VolShape::Constant { c } => *c,
            VolShape::AffineAbs { c0, c1 } => c0 + c1 * y.abs(),
            VolShape::Tabulated { ys, values } => {
                let k = Self::segment(ys, y);
                let w = (y - ys[k]) / (ys[k + 1] - ys[k]);
                values[k] + w * (values[k + 1] - values[k])
            }
        }
    }

    /// Derivative, with the one-sided value `0` at kinks of `|y|`.
    pub fn deriv(&self, y: f64) -> f64 {
        match self {
            VolShape::Linear => 1.0,
            VolShape::Constant { .. } => 0.0,
            VolShape::AffineAbs { c1, .. } => {
                if y > 0.0 {
                    *c1
                } else if y < 0.0 {
                    -c1
                } else {
                    0.0
                }
            }
            VolShape::Tabulated { ys, values } => {
                let k = Self::segment(ys, y);
                (values[k + 1] - values[k]) / (ys[k + 1] - ys[k])
            }
        }
    }

    /// Smallest `C` with `|σ(y)| <= C (1 + |y|)` on the lattice.
    pub fn growth_constant(&self, lattice: &[f64]) -> f64 {
        lattice.iter().map(|&y| self.eval(y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            VolShape::Constant { c } => *c == 0.0,
            VolShape::AffineAbs { c0, c1 } => *c0 == 0.0 && *c1 == 0.0,
            VolShape::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
            VolShape::Linear => false,
        }
    }
}

/// The volatility function `σ`, its scaling limit `σ̃` and exponent `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolFunction {
    pub sigma: VolShape,
    pub sigma_tilde: VolShape,
    pub b: f64,
    /// Linear growth constant `C` of `σ`.
    #[serde(default = "default_growth")]
    pub growth: f64,
}

fn default_growth() -> f64 {
    1.0
}

fn growth_lattice() -> Vec<f64> {
    (-400..=400).map(|k| k as f64 * 0.25).collect()
}

impl VolFunction {
    /// `σ(y) = y` with `σ̃ = σ`.
    pub fn linear(b: f64) -> Self {
        Self { sigma: VolShape::Linear, sigma_tilde: VolShape::Linear, b, growth: 1.0 }
    }

    /// `σ(y) = c0 + c1|y|` with scaling limit `c1|y|`.
    pub fn affine_abs(c0: f64, c1: f64, b: f64) -> Self {
        let sigma = VolShape::AffineAbs { c0, c1 };
        let growth = c0.abs().max(c1.abs());
        Self { sigma, sigma_tilde: VolShape::AffineAbs { c0: 0.0, c1 }, b, growth }
    }

    /// `σ ≡ σ̃ ≡ c`.
    pub fn constant(c: f64, b: f64) -> Self {
        let shape = VolShape::Constant { c };
        Self { sigma: shape.clone(), sigma_tilde: shape, b, growth: c.abs() }
    }

    pub fn custom(sigma: VolShape, sigma_tilde: VolShape, b: f64) -> Self {
        let growth = sigma.growth_constant(&growth_lattice());
        Self { sigma, sigma_tilde, b, growth }
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma.validate()?;
        self.sigma_tilde.validate()?;
        ensure(self.b > 0.0 && self.b.is_finite(), || format!("b must be positive, got {}", self.b))?;
        let c = self.sigma.growth_constant(&growth_lattice());
        ensure(c <= self.growth * (1.0 + 1e-12), || {
            format!("sigma violates the growth bound C = {}: needs {c}", self.growth)
        })
    }

    /// `ε^b σ(y / ε^b)`.
    pub fn scaled(&self, eps: f64, y: f64) -> f64 {
        if matches!(self.sigma, VolShape::Linear) {
            return y;
        }
        let e = eps.powf(self.b);
        e * self.sigma.eval(y / e)
    }
}
