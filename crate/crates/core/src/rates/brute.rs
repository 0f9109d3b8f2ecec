//! Derivative-free global search used as an independent check of [`solve`].
//!
//! Every control direction `d` is scaled to unit energy and followed from
//! the origin to the first point `r d` satisfying the constraint; the rate
//! is the smallest `r²/2` over directions (and starts). Directions come from
//! a fixed lattice plus seeded random draws and are refined by Nelder-Mead
//! and compass search.
//!
//! [`solve`]: super::solve

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::discretization::Discretization;
use super::{ControlVector, Sense, VariationalProblem};
use crate::error::{ensure, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub value: f64,
    pub controls: ControlVector,
    pub start: f64,
    /// `x(t_m) - level` at the returned controls.
    pub residual: f64,
    pub evaluations: usize,
}

const SCAN_STEPS: usize = 64;
const RANDOM_DIRECTIONS: usize = 256;

struct Search<'a> {
    d: &'a Discretization,
    level: f64,
    sense: Sense,
    lo: f64,
    hi: f64,
    r_cap: f64,
    evals: std::cell::Cell<usize>,
}

impl Search<'_> {
    fn n(&self) -> usize {
        self.d.n
    }

    fn free_start(&self) -> bool {
        self.hi > self.lo
    }

    fn split(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.n();
        let u = if self.free_start() { z[2 * n].clamp(self.lo, self.hi) } else { self.lo };
        (z[..n].to_vec(), z[n..2 * n].to_vec(), u)
    }

    fn excess(&self, f: &[f64], g: &[f64], u: f64, r: f64) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let fs: Vec<f64> = f.iter().map(|x| r * x).collect();
        let gs: Vec<f64> = g.iter().map(|x| r * x).collect();
        self.d.forward(&fs, &gs, u).x[self.d.m] - self.level
    }

    fn feasible(&self, s: f64, s0: f64) -> bool {
        match self.sense {
            Sense::Ge => s >= 0.0,
            Sense::Le => s <= 0.0,
            Sense::Eq => s == 0.0 || s.signum() != s0.signum(),
        }
    }

    /// Unit-energy direction and the first feasible radius along it.
    fn ray(&self, z: &[f64], geometric: bool) -> Option<(Vec<f64>, Vec<f64>, f64, f64)> {
        let (f, g, u) = self.split(z);
        let e = self.d.energy(&f, &g);
        if e <= 0.0 || !e.is_finite() {
            return None;
        }
        let k = 1.0 / (2.0 * e).sqrt();
        let f: Vec<f64> = f.iter().map(|x| x * k).collect();
        let g: Vec<f64> = g.iter().map(|x| x * k).collect();
        let s0 = self.excess(&f, &g, u, 0.0);
        if self.feasible(s0, s0) && self.sense != Sense::Eq || s0 == 0.0 {
            return Some((f, g, u, 0.0));
        }
        let grid: Vec<f64> = if geometric {
            (0..200).map(|j| 1e-4 * 1.08f64.powi(j)).collect()
        } else {
            (1..=SCAN_STEPS).map(|j| self.r_cap * j as f64 / SCAN_STEPS as f64).collect()
        };
        let mut prev = 0.0;
        for r in grid {
            if self.feasible(self.excess(&f, &g, u, r), s0) {
                let (mut a, mut b) = (prev, r);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if self.feasible(self.excess(&f, &g, u, mid), s0) {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                return Some((f, g, u, b));
            }
            prev = r;
        }
        None
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.ray(z, false).map_or(f64::INFINITY, |(_, _, _, r)| 0.5 * r * r)
    }
}

fn nelder_mead(obj: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| obj(x)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = vals[n] - vals[0];
        if spread.is_finite() && spread <= 1e-13 * vals[0].abs().max(1e-12) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = obj(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = obj(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(0.5);
                let v = obj(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = obj(&x);
                (x, v)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let x: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    vals[i] = obj(&x);
                    simplex[i] = x;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    (simplex[best].clone(), vals[best])
}

fn compass(obj: &dyn Fn(&[f64]) -> f64, x0: &[f64], f0: f64, step: f64) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut h = step;
    while h > 1e-8 * step {
        let mut improved = false;
        for i in 0..x.len() {
            for sgn in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sgn * h;
                let fy = obj(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}

/// Brute-force rate of `problem` rebuilt on a uniform grid of `coarse_n`
/// nodes with the same horizon.
pub fn brute_force_rate(problem: &VariationalProblem, coarse_n: usize) -> Result<BruteForceResult> {
    ensure((2..=8).contains(&coarse_n), || format!("coarse grid must have 2..=8 nodes, got {coarse_n}"))?;
    let p = problem.with_grid(TimeGrid::uniform_horizon(coarse_n, problem.grid.last())?);
    let d = Discretization::new(&p)?;
    let n = d.n;
    let (lo, hi) = p.start.bounds();
    let mut search = Search {
        d: &d,
        level: p.constraint.level,
        sense: p.constraint.sense,
        lo,
        hi,
        r_cap: 0.0,
        evals: std::cell::Cell::new(0),
    };
    let dim = 2 * n + usize::from(search.free_start());
    let starts: Vec<f64> = if search.free_start() { vec![lo, 0.5 * (lo + hi), hi] } else { vec![lo] };

    // the zero control may already be feasible
    for &u in &starts {
        let s = search.excess(&vec![0.0; n], &vec![0.0; n], u, 0.0);
        let ok = match search.sense {
            Sense::Ge => s >= 0.0,
            Sense::Le => s <= 0.0,
            Sense::Eq => s == 0.0,
        };
        if ok {
            return Ok(BruteForceResult {
                value: 0.0,
                controls: ControlVector::zeros(n),
                start: u,
                residual: s,
                evaluations: search.evals.get(),
            });
        }
    }

    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..2 * n {
        for sgn in [1.0, -1.0] {
            let mut v = vec![0.0; 2 * n];
            v[i] = sgn;
            dirs.push(v);
        }
    }
    for (a, b) in [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0), (0.0, -1.0), (-1.0, 0.0)]
    {
        dirs.push((0..2 * n).map(|i| if i < n { a } else { b }).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..RANDOM_DIRECTIONS {
        dirs.push((0..2 * n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    for &u in &starts {
        for d in &dirs {
            let mut z = d.clone();
            if search.free_start() {
                z.push(u);
            }
            points.push(z);
        }
    }

    // feasible-energy bound from a geometric search along every direction
    let mut bound = f64::INFINITY;
    for z in &points {
        if let Some((_, _, _, r)) = search.ray(z, true) {
            bound = bound.min(0.5 * r * r);
        }
    }
    if !bound.is_finite() {
        return Ok(BruteForceResult {
            value: f64::INFINITY,
            controls: ControlVector::zeros(n),
            start: lo,
            residual: f64::NAN,
            evaluations: search.evals.get(),
        });
    }
    search.r_cap = (2.0 * bound).sqrt() * 1.05;

    let mut scored: Vec<(f64, Vec<f64>)> = points.into_iter().map(|z| (search.value(&z), z)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let obj = |z: &[f64]| search.value(z);
    let mut best = scored[0].clone();
    for (v0, z0) in scored.iter().take(6) {
        let (mut z, mut v) = (z0.clone(), *v0);
        let mut step = 0.3;
        for _ in 0..3 {
            let (zn, vn) = nelder_mead(&obj, &z, step, 1500 * dim);
            if vn < v {
                z = zn;
                v = vn;
            }
            step *= 0.3;
        }
        let (zc, vc) = compass(&obj, &z, v, 0.05);
        if vc < best.0 {
            best = (vc, zc);
        }
    }
    let (f, g, u, r) = search.ray(&best.1, false).expect("the best point has a finite value");
    let fs: Vec<f64> = f.iter().map(|x| r * x).collect();
    let gs: Vec<f64> = g.iter().map(|x| r * x).collect();
    let residual = search.excess(&fs, &gs, u, 1.0);
    Ok(BruteForceResult {
        value: d.energy(&fs, &gs),
        controls: ControlVector { f: fs, g: gs },
        start: u,
        residual,
        evaluations: search.evals.get(),
    })
}
