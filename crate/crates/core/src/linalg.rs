//! Dense lower-triangular factorizations for small covariance matrices.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// `L z` for a lower-triangular `L`.
    pub fn lower_mul(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..=i {
                acc += row[j] * z[j];
            }
            out[i] = acc;
        }
    }
}

/// Strict Cholesky: fails on the first non-positive pivot and reports it.
pub fn cholesky(a: &SquareMatrix) -> Result<SquareMatrix> {
    factor(a, false)
}

/// Cholesky for positive semi-definite matrices. Pivots below a relative
/// threshold are treated as exact zeros and their column is dropped.
pub fn cholesky_psd(a: &SquareMatrix) -> Result<SquareMatrix> {
    factor(a, true)
}

fn factor(a: &SquareMatrix, semidefinite: bool) -> Result<SquareMatrix> {
    let n = a.dim();
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = SquareMatrix::zeros(n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if semidefinite && d <= 1e-12 * scale {
            if d < -1e-9 * scale {
                return Err(Error::Factorization { index: j, pivot: d });
            }
            continue;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Factorization { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
