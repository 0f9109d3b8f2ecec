//! Numerical integration: adaptive Gauss-Kronrod for smooth or mildly singular
//! integrands, and fixed tanh-sinh rules for panels with algebraic endpoint
//! singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-14, rel: 1e-11, max_subdivisions: 400 }
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 7/15-point Gauss-Kronrod on `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut total = v;
    let mut err = e;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut splits = 0;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if splits >= tol.max_subdivisions || !err.is_finite() {
            return Err(Error::Quadrature { estimate: total, error: err });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::Quadrature { estimate: total, error: err });
        }
        let (v1, e1) = gk15(&mut f, seg.a, mid);
        let (v2, e2) = gk15(&mut f, mid, seg.b);
        total += v1 + v2 - seg.value;
        err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        splits += 1;
        if splits % 32 == 0 {
            // refresh the running sums to keep rounding from accumulating
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(total)
}

/// `∫_s^t (u - s)^p g(u) du` for `p > -1`.
///
/// The substitution `v = (u - s)^{p+1}` removes the endpoint singularity:
/// the integral becomes `1/(p+1) ∫_0^{(t-s)^{p+1}} g(s + v^{1/(p+1)}) dv`.
/// `g` receives both `u` and the gap `u - s`, which is known exactly.
pub fn integrate_left_singular<G: FnMut(f64, f64) -> f64>(
    mut g: G,
    s: f64,
    gap: f64,
    p: f64,
    tol: Tolerance,
) -> Result<f64> {
    let q = p + 1.0;
    let upper = gap.powf(q);
    let inv = 1.0 / q;
    let v = integrate(
        |v| {
            let d = v.powf(inv).min(gap);
            g(s + d, d)
        },
        0.0,
        upper,
        tol,
    )?;
    Ok(v * inv)
}

/// A tanh-sinh rule on `[0, 1]`.
///
/// Each node stores its distance to both endpoints so that callers can form
/// `t - s` without cancellation when a singularity sits at an endpoint.
#[derive(Debug, Clone)]
pub struct TanhSinhRule {
    pub from_left: Vec<f64>,
    pub from_right: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TanhSinhRule {
    /// Step `h = 2^-level`, truncated where nodes come closer than `min_gap`
    /// to an endpoint.
    pub fn new(level: u32, min_gap: f64) -> Self {
        let h = 0.5f64.powi(level as i32);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut from_left = Vec::new();
        let mut from_right = Vec::new();
        let mut weights = Vec::new();
        let kmax = (4.0 / h) as i64;
        for k in -kmax..=kmax {
            let x = k as f64 * h;
            let y = half_pi * x.sinh();
            // 1 - tanh(|y|) computed directly
            let comp = 2.0 / ((2.0 * y.abs()).exp() + 1.0);
            let near = 0.5 * comp;
            let far = 1.0 - near;
            let (l, r) = if y < 0.0 { (near, far) } else { (far, near) };
            if l < min_gap || r < min_gap {
                continue;
            }
            let w = 0.5 * h * half_pi * x.cosh() / y.cosh().powi(2);
            from_left.push(l);
            from_right.push(r);
            weights.push(w);
        }
        Self { from_left, from_right, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl Default for TanhSinhRule {
    fn default() -> Self {
        Self::new(2, 1e-200)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial() {
        let v = integrate(|x| x * x * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn left_singular_beta_function() {
        // ∫_0^1 u^{-0.3} (1-u)^{0.2} du = B(0.7, 1.2)
        let v = integrate_left_singular(|u, _| (1.0 - u).powf(0.2), 0.0, 1.0, -0.3, Tolerance::default()).unwrap();
        let b = libm::tgamma(0.7) * libm::tgamma(1.2) / libm::tgamma(1.9);
        assert!((v - b).abs() < 1e-9, "{v} vs {b}");
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        let r = TanhSinhRule::new(4, 1e-300);
        let v: f64 = r.from_left.iter().zip(&r.weights).map(|(x, w)| w * x.powf(-0.5)).sum();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }
}
