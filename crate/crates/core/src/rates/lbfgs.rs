//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `‖∇f‖_∞ <= gtol`.
    pub gtol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 12, max_iters: 3000, gtol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns the value and writes the gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut stalled = 0;
    for it in 0..opts.max_iters {
        let gn = inf_norm(&g);
        if gn <= opts.gtol || !fx.is_finite() {
            return LbfgsOutcome { x, f: fx, grad_norm: gn, iters: it, converged: fx.is_finite() };
        }
        // two-loop recursion
        d.copy_from_slice(&g);
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // not a descent direction: restart from steepest descent
            hist.clear();
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&g, &d);
        }
        let step0 = if hist.is_empty() { (1.0 / inf_norm(&d)).min(1.0) } else { 1.0 };
        let Some((step, f_new)) = wolfe(&mut f, &x, fx, slope, &d, step0, &mut x_new, &mut g_new) else {
            if hist.is_empty() {
                return LbfgsOutcome { x, f: fx, grad_norm: gn, iters: it, converged: false };
            }
            hist.clear();
            continue;
        };
        let s: Vec<f64> = d.iter().map(|v| v * step).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - f_new;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if decrease <= 1e-16 * fx.abs().max(1e-300) {
            stalled += 1;
            if stalled >= 8 {
                let gn = inf_norm(&g);
                return LbfgsOutcome { x, f: fx, grad_norm: gn, iters: it + 1, converged: false };
            }
        } else {
            stalled = 0;
        }
    }
    let gn = inf_norm(&g);
    LbfgsOutcome { x, f: fx, grad_norm: gn, iters: opts.max_iters, converged: gn <= opts.gtol }
}

/// Strong Wolfe line search (More-Thuente style bracketing with cubic
/// interpolation). Leaves the accepted point in `x_new`, `g_new`.
#[allow(clippy::too_many_arguments)]
fn wolfe<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    step0: f64,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> Option<(f64, f64)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut eval = |a: f64, xn: &mut [f64], gn: &mut [f64]| {
        for i in 0..x.len() {
            xn[i] = x[i] + a * d[i];
        }
        let v = f(xn, gn);
        (v, dot(gn, d))
    };
    let (mut a_lo, mut f_lo, mut s_lo) = (0.0, f0, slope0);
    let mut a = step0;
    let mut a_hi = f64::INFINITY;
    let (mut f_hi, mut s_hi) = (f64::NAN, f64::NAN);
    for _ in 0..60 {
        let (fa, sa) = eval(a, x_new, g_new);
        if !fa.is_finite() || fa > f0 + C1 * a * slope0 || (fa >= f_lo && a_lo > 0.0) {
            a_hi = a;
            f_hi = fa;
            s_hi = sa;
        } else if sa.abs() <= -C2 * slope0 {
            return Some((a, fa));
        } else if sa * (a_hi - a_lo) >= 0.0 {
            a_hi = a_lo;
            f_hi = f_lo;
            s_hi = s_lo;
            a_lo = a;
            f_lo = fa;
            s_lo = sa;
        } else {
            a_lo = a;
            f_lo = fa;
            s_lo = sa;
        }
        a = if a_hi.is_finite() {
            let trial = cubic_min(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi);
            let (lo, hi) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
            let margin = 0.1 * (hi - lo);
            if (hi - lo).abs() <= 1e-16 * hi.abs().max(1e-300) {
                break;
            }
            trial.clamp(lo + margin, hi - margin)
        } else {
            4.0 * a
        };
    }
    if a_lo > 0.0 && f_lo < f0 {
        let (fa, _) = eval(a_lo, x_new, g_new);
        return Some((a_lo, fa));
    }
    None
}

fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    if !fb.is_finite() || !db.is_finite() {
        return 0.5 * (a + b);
    }
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return 0.5 * (a + b);
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if t.is_finite() {
        t
    } else {
        0.5 * (a + b)
    }
}
