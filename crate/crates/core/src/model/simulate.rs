use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{InitialLaw, ModelParams, RescalingScheme};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{Hurst, KernelSpec, KernelTable};
use crate::linalg::{cholesky_psd, SquareMatrix};
use crate::rng::map_batches;

/// How the volatility enters the rescaled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolMode {
    /// `ε^b σ(y / ε^b)`, the exact rescaling of the model.
    #[default]
    Scaled,
    /// The scaling limit `σ̃(y)` in place of the rescaled `σ`.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub vol_mode: VolMode,
    /// Accept grids with fewer than 16 nodes.
    pub allow_coarse_grid: bool,
    /// Accept values of `b` outside the range of the LDP theorems.
    pub allow_scheme_violation: bool,
}

/// One simulated path. Slices over times include `t_0 = 0` where noted.
pub struct PathView<'a> {
    pub theta: f64,
    /// `Y` at `t_0, ..., t_n`.
    pub y: &'a [f64],
    /// `X` at `t_0, ..., t_n`.
    pub x: &'a [f64],
    /// Volatility `s(Y_{t_{k-1}})` used on panel `k`.
    pub vol: &'a [f64],
    /// Increments of `B` on the panels.
    pub db: &'a [f64],
    /// Increments of `B⊥` on the panels.
    pub db_perp: &'a [f64],
}

/// Pre-factored simulator of `(X^ε, Y^ε)` on a grid.
///
/// `Y^ε` is exact in law at the nodes: the increments of `B` and the noise
/// integrals `∫_0^{t_i} Φ(t_i, s) dB_s` are drawn jointly from their exact
/// Gaussian law. `X^ε` is an Euler scheme driven by the same increments.
#[derive(Debug, Clone)]
pub struct Simulator {
    grid: TimeGrid,
    law: InitialLaw,
    widths: Vec<f64>,
    chol: SquareMatrix,
    noisy: bool,
    growth: Vec<f64>,
    hom: Vec<f64>,
    start_scale: f64,
    noise_scale: f64,
    drift_coef: f64,
    diff_coef: f64,
    rho: f64,
    rho_bar: f64,
    eps: f64,
    scheme: RescalingScheme,
    mode: VolMode,
    params: ModelParams,
}

impl Simulator {
    pub fn new(
        params: &ModelParams,
        law: &InitialLaw,
        scheme: RescalingScheme,
        eps: f64,
        grid: &TimeGrid,
        opts: SimOptions,
    ) -> Result<Self> {
        params.validate()?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if grid.len() < 16 && !opts.allow_coarse_grid {
            return Err(Error::InvalidParameter(format!("grid has {} nodes, at least 16 are required", grid.len())));
        }
        if let Err(msg) = scheme.check_b(params.hurst) {
            if !opts.allow_scheme_violation {
                return Err(Error::Assumption(msg));
            }
        }
        let law = law.resolve(Some(params))?;
        let h = params.hurst.value();
        let (beta, xi) = (params.beta, params.xi);
        let b = scheme.b();
        let eb = eps.powf(b);
        let half = Hurst::new(0.5)?;
        let (beta_t, lambda_t, kernel, noise_scale, start_scale, drift_coef, diff_coef) = match scheme {
            RescalingScheme::Tails { .. } => {
                (beta, eb * params.lambda, KernelSpec::FFou { hurst: params.hurst, beta, xi }, eb, eb, 1.0, eb)
            }
            RescalingScheme::SmallTime { .. } => {
                let e2hb = eps.powf(2.0 * h + b);
                (
                    beta * eps * eps,
                    eb * eps * eps * params.lambda,
                    KernelSpec::GEps { hurst: params.hurst, beta, xi, eps },
                    e2hb,
                    eb,
                    eps.powf(2.0 * h + 1.0),
                    e2hb,
                )
            }
            RescalingScheme::DiffusiveSmallTime => (
                beta * eps * eps,
                eps * eps * params.lambda,
                KernelSpec::FFou { hurst: half, beta: beta * eps * eps, xi },
                eps,
                1.0,
                eps * eps,
                eps,
            ),
        };
        let n = grid.len();
        let widths = grid.panel_widths();
        let noisy = xi > 0.0;
        let chol = if noisy {
            let table = KernelTable::new(&kernel, grid)?;
            let gram = table.gram();
            let (m0, _) = table.panel_moments();
            let cov = SquareMatrix::from_fn(2 * n, |i, j| match (i < n, j < n) {
                (true, true) => {
                    if i == j {
                        widths[i]
                    } else {
                        0.0
                    }
                }
                (false, true) => m0[i - n][j],
                (true, false) => m0[j - n][i],
                (false, false) => gram.get(i - n, j - n),
            });
            cholesky_psd(&cov)?
        } else {
            SquareMatrix::from_fn(n, |i, j| if i == j { widths[i].sqrt() } else { 0.0 })
        };
        let times: Vec<f64> = (0..=n).map(|k| grid.t(k)).collect();
        let growth = times.iter().map(|t| (beta_t * t).exp()).collect();
        let hom = times.iter().map(|t| lambda_t * (beta_t * t).exp_m1() / beta_t).collect();
        Ok(Self {
            grid: grid.clone(),
            law,
            widths,
            chol,
            noisy,
            growth,
            hom,
            start_scale,
            noise_scale,
            drift_coef,
            diff_coef,
            rho: params.rho,
            rho_bar: params.rho_bar(),
            eps,
            scheme,
            mode: opts.vol_mode,
            params: params.clone(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn vol(&self, y: f64) -> f64 {
        let v = &self.params.vol;
        match (self.mode, self.scheme) {
            (VolMode::Limit, _) => v.sigma_tilde.eval(y),
            (VolMode::Scaled, RescalingScheme::DiffusiveSmallTime) => v.sigma.eval(y),
            (VolMode::Scaled, _) => v.scaled(self.eps, y),
        }
    }

    /// Simulates `n_paths` paths and folds each batch into an accumulator.
    /// Accumulators are returned in batch order.
    pub fn run<R, I, F>(&self, n_paths: usize, seed: u64, init: I, fold: F) -> Vec<R>
    where
        R: Send,
        I: Fn() -> R + Sync,
        F: Fn(&mut R, &PathView) + Sync,
    {
        let n = self.grid.len();
        let dim = self.chol.dim();
        map_batches(n_paths, seed, |rng, range| {
            let mut acc = init();
            let mut z = vec![0.0; dim];
            let mut v = vec![0.0; dim];
            let mut y = vec![0.0; n + 1];
            let mut x = vec![0.0; n + 1];
            let mut vol = vec![0.0; n];
            let mut perp = vec![0.0; n];
            for _ in range {
                let theta = self.law.draw(rng);
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(rng);
                }
                for (p, w) in perp.iter_mut().zip(&self.widths) {
                    let e: f64 = StandardNormal.sample(rng);
                    *p = e * w.sqrt();
                }
                self.chol.lower_mul(&z, &mut v);
                let start = self.start_scale * theta;
                for i in 0..=n {
                    let noise = if i > 0 && self.noisy { v[n + i - 1] } else { 0.0 };
                    y[i] = start * self.growth[i] + self.hom[i] + self.noise_scale * noise;
                }
                x[0] = 0.0;
                for k in 1..=n {
                    let s = self.vol(y[k - 1]);
                    vol[k - 1] = s;
                    let shock = self.rho * v[k - 1] + self.rho_bar * perp[k - 1];
                    x[k] = x[k - 1] - 0.5 * self.drift_coef * s * s * self.widths[k - 1] + self.diff_coef * s * shock;
                }
                let view = PathView { theta, y: &y, x: &x, vol: &vol, db: &v[..n], db_perp: &perp };
                fold(&mut acc, &view);
            }
            acc
        })
    }
}

/// Paired paths of `X^ε` and `Y^ε` at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedBatch {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub eps: f64,
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SimulatedBatch {
    pub fn x_path(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.x[i * n..(i + 1) * n]
    }

    pub fn y_path(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.y[i * n..(i + 1) * n]
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    params: &ModelParams,
    law: &InitialLaw,
    scheme: RescalingScheme,
    eps: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<SimulatedBatch> {
    let sim = Simulator::new(params, law, scheme, eps, grid, opts)?;
    let parts = sim.run(
        n_paths,
        seed,
        || (Vec::new(), Vec::new(), Vec::new()),
        |acc: &mut (Vec<f64>, Vec<f64>, Vec<f64>), p| {
            acc.0.push(p.theta);
            acc.1.extend_from_slice(&p.x[1..]);
            acc.2.extend_from_slice(&p.y[1..]);
        },
    );
    let mut batch = SimulatedBatch {
        grid: grid.clone(),
        n_paths,
        seed,
        eps,
        theta: Vec::with_capacity(n_paths),
        x: Vec::with_capacity(n_paths * grid.len()),
        y: Vec::with_capacity(n_paths * grid.len()),
    };
    for (t, x, y) in parts {
        batch.theta.extend(t);
        batch.x.extend(x);
        batch.y.extend(y);
    }
    Ok(batch)
}
