use super::{ControlVector, VariationalProblem};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{KernelTable, VolterraOperator};
use crate::model::VolShape;

/// Tridiagonal mass matrix `∫ ℓ_i ℓ_j` of the piecewise-linear basis,
/// including the linear extension over `[0, t_1]`.
#[derive(Debug, Clone)]
pub(crate) struct MassMatrix {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl MassMatrix {
    pub(crate) fn new(grid: &TimeGrid) -> Self {
        let n = grid.len();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        let t1 = grid.t(1);
        let d = grid.t(2) - t1;
        let r = t1 / d;
        // f = f_1 (1 + ρ) + f_2 (-ρ) with ρ = (t_1 - s)/d ∈ [0, r]
        diag[0] += d * ((1.0 + r).powi(3) - 1.0) / 3.0;
        off[0] -= d * (r * r / 2.0 + r * r * r / 3.0);
        diag[1] += d * r * r * r / 3.0;
        for p in 2..=n {
            let w = grid.t(p) - grid.t(p - 1);
            diag[p - 2] += w / 3.0;
            diag[p - 1] += w / 3.0;
            off[p - 2] += w / 6.0;
        }
        Self { diag, off }
    }

    pub(crate) fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    pub(crate) fn quad_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..v.len() {
            acc += self.diag[i] * v[i] * v[i];
            if i + 1 < v.len() {
                acc += 2.0 * self.off[i] * v[i] * v[i + 1];
            }
        }
        acc
    }
}

/// `½ (∫ f² + ∫ g²)` for piecewise-linear controls.
pub fn l2_energy(f: &[f64], g: &[f64], grid: &TimeGrid) -> Result<f64> {
    for v in [f, g] {
        if v.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: v.len() });
        }
    }
    let m = MassMatrix::new(grid);
    Ok(0.5 * (m.quad_form(f) + m.quad_form(g)))
}

/// Everything needed to evaluate the forward map and its gradient.
#[derive(Debug, Clone)]
pub(crate) struct Discretization {
    pub n: usize,
    pub m: usize,
    pub op: VolterraOperator,
    pub mass: MassMatrix,
    /// Trapezoid weights on `[0, t_m]` for nodes `0..=m`.
    pub w: Vec<f64>,
    /// `f(0) = e0 f_1 + e1 f_2`.
    pub e: (f64, f64),
    /// Start response at nodes `0..=n`.
    pub hom: Vec<f64>,
    pub widths: Vec<f64>,
    pub vol: VolShape,
    pub rho: f64,
    pub rho_bar: f64,
    pub drift: f64,
}

/// Forward evaluation at nodes `0..=n`.
#[derive(Debug, Clone)]
pub(crate) struct Forward {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub f0: f64,
    pub g0: f64,
}

impl Discretization {
    pub(crate) fn new(problem: &VariationalProblem) -> Result<Self> {
        problem.validate()?;
        let grid = &problem.grid;
        let n = grid.len();
        let m = problem.terminal_node();
        let op = KernelTable::new(&problem.kernel, grid)?.operator();
        let t1 = grid.t(1);
        let d = grid.t(2) - t1;
        Ok(Self {
            n,
            m,
            op,
            mass: MassMatrix::new(grid),
            w: grid.weights_from_origin(m),
            e: (1.0 + t1 / d, -t1 / d),
            hom: (0..=n).map(|k| problem.start_response.at(grid.t(k))).collect(),
            widths: grid.panel_widths(),
            vol: problem.vol.clone(),
            rho: problem.rho,
            rho_bar: (1.0 - problem.rho * problem.rho).max(0.0).sqrt(),
            drift: if problem.include_drift { 1.0 } else { 0.0 },
        })
    }

    pub(crate) fn energy(&self, f: &[f64], g: &[f64]) -> f64 {
        0.5 * (self.mass.quad_form(f) + self.mass.quad_form(g))
    }

    fn integrand(&self, y: f64, f: f64, g: f64) -> f64 {
        let s = self.vol.eval(y);
        -0.5 * self.drift * s * s + s * (self.rho * f + self.rho_bar * g)
    }

    pub(crate) fn forward(&self, f: &[f64], g: &[f64], u: f64) -> Forward {
        let n = self.n;
        let mut y = vec![0.0; n + 1];
        y[0] = u * self.hom[0];
        for i in 1..=n {
            y[i] = u * self.hom[i] + crate::linalg::dot(self.op.row(i), f);
        }
        let f0 = self.e.0 * f[0] + self.e.1 * f[1];
        let g0 = self.e.0 * g[0] + self.e.1 * g[1];
        let mut x = vec![0.0; n + 1];
        let mut prev = self.integrand(y[0], f0, g0);
        for k in 1..=n {
            let cur = self.integrand(y[k], f[k - 1], g[k - 1]);
            x[k] = x[k - 1] + 0.5 * self.widths[k - 1] * (prev + cur);
            prev = cur;
        }
        Forward { y, x, f0, g0 }
    }

    /// `x(t_m)` and its gradient with respect to `(f, g, u)`.
    pub(crate) fn terminal_with_grad(
        &self,
        f: &[f64],
        g: &[f64],
        u: f64,
        df: &mut [f64],
        dg: &mut [f64],
    ) -> (f64, f64) {
        let fw = self.forward(f, g, u);
        let (n, m) = (self.n, self.m);
        df.iter_mut().for_each(|v| *v = 0.0);
        dg.iter_mut().for_each(|v| *v = 0.0);
        let mut du = 0.0;
        for k in 0..=m {
            let (fk, gk) = if k == 0 { (fw.f0, fw.g0) } else { (f[k - 1], g[k - 1]) };
            let yk = fw.y[k];
            let s = self.vol.eval(yk);
            let ds = self.vol.deriv(yk);
            let phi_y = -self.drift * s * ds + ds * (self.rho * fk + self.rho_bar * gk);
            let wk = self.w[k];
            du += wk * phi_y * self.hom[k];
            if k >= 1 {
                let row = self.op.row(k);
                for j in 0..n {
                    df[j] += wk * phi_y * row[j];
                }
                df[k - 1] += wk * self.rho * s;
                dg[k - 1] += wk * self.rho_bar * s;
            } else {
                df[0] += wk * self.rho * s * self.e.0;
                df[1] += wk * self.rho * s * self.e.1;
                dg[0] += wk * self.rho_bar * s * self.e.0;
                dg[1] += wk * self.rho_bar * s * self.e.1;
            }
        }
        (fw.x[m], du)
    }
}

/// `(y, x)` at the grid nodes for the given controls and start.
pub fn path_from_controls(
    problem: &VariationalProblem,
    controls: &ControlVector,
    start: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = problem.grid.len();
    for v in [&controls.f, &controls.g] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let d = Discretization::new(problem)?;
    let fw = d.forward(&controls.f, &controls.g, start);
    Ok((fw.y[1..].to_vec(), fw.x[1..].to_vec()))
}
