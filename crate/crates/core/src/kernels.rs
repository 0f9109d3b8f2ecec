//! Volterra kernels of fractional Brownian motion and the fractional
//! Ornstein-Uhlenbeck process, their Gram matrices and the induced integral
//! operator on a time grid.
//!
//! With `a = H - 1/2` and `κ_H = (2H Γ(1/2 - H) / (Γ(H + 1/2) Γ(2 - 2H)))^{1/2}`,
//! every fractional kernel here is an instance of
//!
//! ```text
//! H < 1/2:  ξ κ_H s^{-a} [ (t(t-s))^a + ∫_s^t (β - a/u) (u(u-s))^a e^{β(t-u)} du ]
//! H > 1/2:  ξ κ_H a s^{-a} ∫_s^t u^a (u-s)^{a-1} e^{β(t-u)} du
//! H = 1/2:  ξ e^{β(t-s)}
//! ```
//!
//! `K^H` is the case `β = 0, ξ = 1`; `G_ε` replaces `β` by `β ε²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::SquareMatrix;
use crate::quadrature::{integrate_left_singular, TanhSinhRule, Tolerance};
use crate::special::gamma;

/// Hurst index in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(h: f64) -> Result<Self> {
        ensure(h > 0.0 && h < 1.0, || format!("Hurst index must lie in (0, 1), got {h}"))?;
        Ok(Self(h))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

/// Which kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum KernelSpec {
    #[serde(rename = "K_fbm")]
    KFbm {
        #[serde(rename = "H")]
        hurst: Hurst,
    },
    #[serde(rename = "F_fou")]
    FFou {
        #[serde(rename = "H")]
        hurst: Hurst,
        beta: f64,
        xi: f64,
    },
    #[serde(rename = "G_eps")]
    GEps {
        #[serde(rename = "H")]
        hurst: Hurst,
        beta: f64,
        xi: f64,
        eps: f64,
    },
    #[serde(rename = "G_zero")]
    GZero {
        #[serde(rename = "H")]
        hurst: Hurst,
        xi: f64,
    },
    Identity,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let (beta, xi, eps) = match *self {
            KernelSpec::KFbm { .. } | KernelSpec::Identity => (0.0, 1.0, 0.0),
            KernelSpec::FFou { beta, xi, .. } => (beta, xi, 0.0),
            KernelSpec::GEps { beta, xi, eps, .. } => (beta, xi, eps),
            KernelSpec::GZero { xi, .. } => (0.0, xi, 0.0),
        };
        ensure(beta.is_finite(), || format!("beta must be finite, got {beta}"))?;
        ensure(xi.is_finite() && xi >= 0.0, || format!("xi must be non-negative, got {xi}"))?;
        ensure(eps.is_finite() && eps >= 0.0, || format!("eps must be non-negative, got {eps}"))?;
        Ok(())
    }

    /// `(H, β, ξ)` of the underlying fractional kernel; `None` for the identity.
    fn fractional(&self) -> Option<(f64, f64, f64)> {
        match *self {
            KernelSpec::KFbm { hurst } => Some((hurst.value(), 0.0, 1.0)),
            KernelSpec::FFou { hurst, beta, xi } => Some((hurst.value(), beta, xi)),
            KernelSpec::GEps { hurst, beta, xi, eps } => Some((hurst.value(), beta * eps * eps, xi)),
            KernelSpec::GZero { hurst, xi } => Some((hurst.value(), 0.0, xi)),
            KernelSpec::Identity => None,
        }
    }

    pub fn hurst(&self) -> Option<f64> {
        self.fractional().map(|f| f.0)
    }

    /// Kernel value with the gap `t - s` supplied separately.
    pub(crate) fn value_with_gap(&self, t: f64, s: f64, gap: f64) -> Result<f64> {
        match self.fractional() {
            None => Ok(1.0),
            Some((h, beta, xi)) => fractional_kernel(h, beta, xi, t, s, gap),
        }
    }
}

/// Normalizing constant `κ_H` of the Volterra representation of fBm.
pub fn kappa(hurst: Hurst) -> f64 {
    kappa_raw(hurst.value())
}

fn kappa_raw(h: f64) -> f64 {
    let a = h - 0.5;
    (2.0 * h * gamma(1.0 - a) / (gamma(h + 0.5) * gamma(2.0 - 2.0 * h))).sqrt()
}

fn fractional_kernel(h: f64, beta: f64, xi: f64, t: f64, s: f64, gap: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    if h == 0.5 {
        return Ok(xi * (beta * gap).exp());
    }
    let a = h - 0.5;
    let k = kappa_raw(h);
    let tol = Tolerance { abs: 1e-14 * (t * gap).powf(a), rel: 1e-9, max_subdivisions: 400 };
    if a < 0.0 {
        let integral = if beta == 0.0 {
            integrate_left_singular(|u, _| -a * u.powf(a - 1.0), s, gap, a, tol)?
        } else {
            integrate_left_singular(|u, d| (beta - a / u) * u.powf(a) * (beta * (gap - d)).exp(), s, gap, a, tol)?
        };
        Ok(xi * k * s.powf(-a) * ((t * gap).powf(a) + integral))
    } else {
        // the factor a cancels the 1/(p+1) of the substitution
        let integral = integrate_left_singular(|u, d| u.powf(a) * (beta * (gap - d)).exp(), s, gap, a - 1.0, tol)?;
        Ok(xi * k * a * s.powf(-a) * integral)
    }
}

/// `Φ(t, s)` for `0 < s < t`.
pub fn eval_kernel(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    spec.validate()?;
    if !(s > 0.0 && s < t && t.is_finite()) {
        return Err(Error::Domain(format!("kernel needs 0 < s < t, got t = {t}, s = {s}")));
    }
    spec.value_with_gap(t, s, t - s)
}

/// Kernel values at the quadrature nodes of every panel, the shared input of
/// Gram matrices and operator weights.
///
/// Row `i` holds `Φ(t_i, s)` for all nodes `s` of panels `1..=i`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: TimeGrid,
    rule: TanhSinhRule,
    rows: Vec<Vec<f64>>,
}

impl KernelTable {
    pub fn new(spec: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        Self::with_rule(spec, grid, TanhSinhRule::default())
    }

    pub fn with_rule(spec: &KernelSpec, grid: &TimeGrid, rule: TanhSinhRule) -> Result<Self> {
        spec.validate()?;
        let n = grid.len();
        let q = rule.len();
        let rows = (1..=n)
            .into_par_iter()
            .map(|i| {
                let ti = grid.t(i);
                let mut row = Vec::with_capacity(i * q);
                for p in 1..=i {
                    let lo = grid.t(p - 1);
                    let width = grid.t(p) - lo;
                    for k in 0..q {
                        let s = lo + width * rule.from_left[k];
                        let gap = if p == i { width * rule.from_right[k] } else { ti - s };
                        row.push(spec.value_with_gap(ti, s, gap)?);
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: grid.clone(), rule, rows })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn panel(&self, i: usize, p: usize) -> &[f64] {
        let q = self.rule.len();
        &self.rows[i - 1][(p - 1) * q..p * q]
    }

    /// `∫_0^{t_i ∧ t_j} Φ(t_i, s) Φ(t_j, s) ds`.
    pub fn gram(&self) -> SquareMatrix {
        let n = self.grid.len();
        let mut g = SquareMatrix::zeros(n);
        for i in 1..=n {
            for j in i..=n {
                let mut acc = 0.0;
                for p in 1..=i {
                    let width = self.grid.t(p) - self.grid.t(p - 1);
                    let a = self.panel(i, p);
                    let b = self.panel(j, p);
                    let mut part = 0.0;
                    for k in 0..self.rule.len() {
                        part += self.rule.weights[k] * a[k] * b[k];
                    }
                    acc += width * part;
                }
                g.set(i - 1, j - 1, acc);
                g.set(j - 1, i - 1, acc);
            }
        }
        g
    }

    /// `(∫_panel Φ(t_i, s) ds, ∫_panel Φ(t_i, s) (s - t_{p-1}) ds)` indexed
    /// `[i - 1][p - 1]` for `p <= i`.
    pub fn panel_moments(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.grid.len();
        let mut m0 = vec![vec![0.0; n]; n];
        let mut m1 = vec![vec![0.0; n]; n];
        for i in 1..=n {
            for p in 1..=i {
                let width = self.grid.t(p) - self.grid.t(p - 1);
                let vals = self.panel(i, p);
                let (mut a, mut b) = (0.0, 0.0);
                for k in 0..self.rule.len() {
                    let w = self.rule.weights[k] * vals[k];
                    a += w;
                    b += w * self.rule.from_left[k];
                }
                m0[i - 1][p - 1] = width * a;
                m1[i - 1][p - 1] = width * width * b;
            }
        }
        (m0, m1)
    }

    pub fn operator(&self) -> VolterraOperator {
        let (m0, m1) = self.panel_moments();
        VolterraOperator::from_moments(&self.grid, &m0, &m1)
    }
}

/// Gram matrix of the kernel on the grid nodes.
pub fn gram_matrix(spec: &KernelSpec, grid: &TimeGrid) -> Result<SquareMatrix> {
    Ok(KernelTable::new(spec, grid)?.gram())
}

/// `f ↦ (∫_0^{t_i} Φ(t_i, s) f(s) ds)_i` for controls that are piecewise
/// linear between nodes and extended linearly on the first panel.
#[derive(Debug, Clone)]
pub struct VolterraOperator {
    n: usize,
    weights: Vec<f64>,
}

impl VolterraOperator {
    fn from_moments(grid: &TimeGrid, m0: &[Vec<f64>], m1: &[Vec<f64>]) -> Self {
        let n = grid.len();
        let mut w = vec![0.0; n * n];
        let t1 = grid.t(1);
        let d2 = grid.t(2) - t1;
        for i in 1..=n {
            let row = &mut w[(i - 1) * n..i * n];
            // first panel: f = f_1 (1 + (t_1 - s)/d2) + f_2 (s - t_1)/d2
            let (a, b) = (m0[i - 1][0], m1[i - 1][0]);
            row[0] += a * (d2 + t1) / d2 - b / d2;
            row[1] += (b - t1 * a) / d2;
            for p in 2..=i {
                let width = grid.t(p) - grid.t(p - 1);
                let (a, b) = (m0[i - 1][p - 1], m1[i - 1][p - 1]);
                row[p - 2] += a - b / width;
                row[p - 1] += b / width;
            }
        }
        Self { n, weights: w }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Weight of `f_j` in the value at node `i` (both 1-based).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i - 1) * self.n + (j - 1)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[(i - 1) * self.n..i * self.n]
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: f.len() });
        }
        Ok((1..=self.n).map(|i| crate::linalg::dot(self.row(i), f)).collect())
    }
}

/// Convenience wrapper building the operator and applying it once.
pub fn apply_operator(spec: &KernelSpec, f: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: f.len() });
    }
    KernelTable::new(spec, grid)?.operator().apply(f)
}
