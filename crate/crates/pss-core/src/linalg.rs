//! Symmetric tridiagonal matrices and univariate Gauss-Legendre rules.

use crate::error::{PssError, Result};
use serde::{Deserialize, Serialize};

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// `y += c * A x`
    pub fn axpy_matvec(&self, c: f64, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] += c * s;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn bilinear(&self, x: &[f64], z: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            s += x[i] * self.diag[i] * z[i];
            if i + 1 < n {
                s += self.off[i] * (x[i] * z[i + 1] + x[i + 1] * z[i]);
            }
        }
        s
    }

    /// `self + c * other`
    pub fn add_scaled(&mut self, c: f64, other: &SymTridiag) {
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += c * b;
        }
        for (a, b) in self.off.iter_mut().zip(&other.off) {
            *a += c * b;
        }
    }

    pub fn factor(&self) -> Result<LdlTridiag> {
        LdlTridiag::new(self)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }
}

/// `A = L D L^T` with unit lower bidiagonal `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdlTridiag {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl LdlTridiag {
    pub fn new(a: &SymTridiag) -> Result<Self> {
        let n = a.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut di = a.diag[i];
            if i > 0 {
                di -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(di > 0.0) || !di.is_finite() {
                return Err(PssError::Indefinite { row: i, pivot: di });
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = a.off[i] / di;
            }
        }
        Ok(Self { d, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }

    /// Applies `sqrt(D) L^T`, so that `|apply_rt(x)|^2 = x^T A x`.
    pub fn apply_rt(&self, x: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        (0..n)
            .map(|i| {
                let mut s = x[i];
                if i + 1 < n {
                    s += self.l[i] * x[i + 1];
                }
                self.d[i].sqrt() * s
            })
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// Gauss-Legendre nodes and weights on `[-1,1]` (weights sum to 2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn ldl_solves_laplacian() {
        let a = laplacian(7);
        let b: Vec<f64> = (0..7).map(|i| (i as f64).sin() + 1.0).collect();
        let x = a.factor().unwrap().solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-13);
        }
    }

    #[test]
    fn ldl_rejects_indefinite() {
        let mut a = laplacian(4);
        a.diag[2] = -5.0;
        assert!(matches!(a.factor(), Err(PssError::Indefinite { .. })));
    }

    #[test]
    fn rt_reproduces_quadratic_form() {
        let a = laplacian(6);
        let f = a.factor().unwrap();
        let x = [0.3, -1.0, 2.0, 0.5, 0.1, -0.7];
        let y = f.apply_rt(&x);
        assert!((dot(&y, &y) - a.quad_form(&x)).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k} q={q}");
            }
        }
    }
}
