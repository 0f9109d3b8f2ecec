//! Exact Gaussian sampling of fractional Brownian motion and the fractional
//! Ornstein-Uhlenbeck process on a time grid.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::grid::TimeGrid;
use crate::kernels::{gram_matrix, Hurst, KernelSpec};
use crate::linalg::{cholesky, SquareMatrix};
use crate::rng::map_batches;

/// Largest internal grid used by [`PathConstruction::ProductRule`].
pub const MAX_INTERNAL_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathConstruction {
    /// Cholesky factor of the exact covariance of the target process.
    CovFactor,
    /// `ξ ∫ F^H(t, s) dB_s`, sampled through the Gram matrix of the kernel.
    KernelDriven,
    /// fBm on a refined grid, then `ξ (W_t + β ∫_0^t e^{β(t-u)} W_u du)` with
    /// the integral taken exactly against the piecewise-linear interpolant.
    ProductRule,
}

/// Sampled paths, one row per path, one column per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPathBatch {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub values: Vec<f64>,
    pub construction: PathConstruction,
    pub seed: u64,
}

impl GaussianPathBatch {
    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Monte Carlo estimate of `E[X_{t_i} X_{t_j}]` and its standard error.
    pub fn second_moments(&self) -> (SquareMatrix, SquareMatrix) {
        let n = self.grid.len();
        let mut mean = SquareMatrix::zeros(n);
        let mut se = SquareMatrix::zeros(n);
        let m = self.n_paths as f64;
        for i in 0..n {
            for j in 0..=i {
                let (mut s1, mut s2) = (0.0, 0.0);
                for p in 0..self.n_paths {
                    let x = self.path(p);
                    let v = x[i] * x[j];
                    s1 += v;
                    s2 += v * v;
                }
                let mu = s1 / m;
                let var = (s2 / m - mu * mu).max(0.0) * m / (m - 1.0);
                let e = (var / m).sqrt();
                for (a, b) in [(i, j), (j, i)] {
                    mean.set(a, b, mu);
                    se.set(a, b, e);
                }
            }
        }
        (mean, se)
    }
}

/// `½ (t^{2H} + s^{2H} - |t - s|^{2H})`.
pub fn fbm_covariance(hurst: Hurst, t: f64, s: f64) -> f64 {
    let h2 = 2.0 * hurst.value();
    0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2))
}

fn fbm_cov_matrix(hurst: Hurst, nodes: &[f64]) -> SquareMatrix {
    SquareMatrix::from_fn(nodes.len(), |i, j| fbm_covariance(hurst, nodes[i], nodes[j]))
}

fn sample_with_factor(l: &SquareMatrix, n_paths: usize, seed: u64) -> Vec<f64> {
    let n = l.dim();
    let chunks = map_batches(n_paths, seed, |rng, range| {
        let mut out = vec![0.0; range.len() * n];
        let mut z = vec![0.0; n];
        for row in out.chunks_mut(n) {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            l.lower_mul(&z, row);
        }
        out
    });
    chunks.concat()
}

/// fBm at the grid nodes via the Cholesky factor of its covariance.
pub fn sample_fbm(hurst: Hurst, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<GaussianPathBatch> {
    let l = cholesky(&fbm_cov_matrix(hurst, grid.nodes()))?;
    Ok(GaussianPathBatch {
        grid: grid.clone(),
        n_paths,
        values: sample_with_factor(&l, n_paths, seed),
        construction: PathConstruction::CovFactor,
        seed,
    })
}

/// Fractional OU started at zero: `Y_t = ξ ∫_0^t e^{β(t-u)} dW^H_u`.
pub fn sample_fou(
    hurst: Hurst,
    beta: f64,
    xi: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    construction: PathConstruction,
) -> Result<GaussianPathBatch> {
    ensure(beta.is_finite(), || "beta must be finite".into())?;
    ensure(xi >= 0.0 && xi.is_finite(), || format!("xi must be non-negative, got {xi}"))?;
    let values = match construction {
        _ if xi == 0.0 => vec![0.0; n_paths * grid.len()],
        PathConstruction::KernelDriven | PathConstruction::CovFactor => {
            let spec = KernelSpec::FFou { hurst, beta, xi };
            let l = cholesky(&gram_matrix(&spec, grid)?)?;
            sample_with_factor(&l, n_paths, seed)
        }
        PathConstruction::ProductRule => product_rule(hurst, beta, xi, grid, n_paths, seed)?,
    };
    Ok(GaussianPathBatch { grid: grid.clone(), n_paths, values, construction, seed })
}

/// `(∫_0^δ e^{βτ} dτ, ∫_0^δ τ e^{βτ} dτ)`.
fn exp_moments(beta: f64, delta: f64) -> (f64, f64) {
    let x = beta * delta;
    if x.abs() < 0.1 {
        // Σ x^k / (k! (k+1)) and Σ x^k / (k! (k+2))
        let (mut i0, mut i1, mut term) = (0.0, 0.0, 1.0);
        for k in 0..20 {
            i0 += term / (k + 1) as f64;
            i1 += term / (k + 2) as f64;
            term *= x / (k + 1) as f64;
        }
        (delta * i0, delta * delta * i1)
    } else {
        let i0 = x.exp_m1() / beta;
        (i0, delta * x.exp() / beta - i0 / beta)
    }
}

fn product_rule(hurst: Hurst, beta: f64, xi: f64, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let n = grid.len();
    let m = (MAX_INTERNAL_NODES / n).max(1);
    let mut fine = Vec::with_capacity(n * m);
    for k in 1..=n {
        let (a, b) = (grid.t(k - 1), grid.t(k));
        for j in 1..=m {
            fine.push(if j == m { b } else { a + (b - a) * j as f64 / m as f64 });
        }
    }
    let nf = fine.len();
    // weights[i][j]: contribution of W(fine_j) to ∫_0^{t_i} e^{β(t_i-u)} W_u du
    let mut weights = vec![vec![0.0; nf]; n];
    for i in 1..=n {
        let ti = grid.t(i);
        let end = i * m;
        for r in 0..end {
            let u0 = if r == 0 { 0.0 } else { fine[r - 1] };
            let u1 = fine[r];
            let d = u1 - u0;
            let (i0, i1) = exp_moments(beta, d);
            let c = (beta * (ti - u1)).exp();
            if r > 0 {
                weights[i - 1][r - 1] += c * i1 / d;
            }
            weights[i - 1][r] += c * (i0 - i1 / d);
        }
    }
    let l = cholesky(&fbm_cov_matrix(hurst, &fine))?;
    let chunks = map_batches(n_paths, seed, |rng, range| {
        let mut out = vec![0.0; range.len() * n];
        let mut z = vec![0.0; nf];
        let mut w = vec![0.0; nf];
        for row in out.chunks_mut(n) {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            l.lower_mul(&z, &mut w);
            for i in 1..=n {
                let end = i * m;
                let integral: f64 = weights[i - 1][..end].iter().zip(&w[..end]).map(|(a, b)| a * b).sum();
                row[i - 1] = xi * (w[end - 1] + beta * integral);
            }
        }
        out
    });
    Ok(chunks.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_moment_branches_agree() {
        for beta in [-3.0f64, -0.5, 0.7, 2.0] {
            let d = 0.1 / beta.abs() * 0.999;
            let (a0, a1) = exp_moments(beta, d);
            let x = beta * d;
            let b0 = x.exp_m1() / beta;
            let b1 = d * x.exp() / beta - b0 / beta;
            assert!((a0 - b0).abs() < 1e-14 * b0.abs());
            assert!((a1 - b1).abs() < 1e-10 * b1.abs());
        }
    }
}
