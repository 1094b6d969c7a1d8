//! Tensorized Legendre polynomials: coefficient bounds, a monotone
//! set-selection surrogate and quadrature of true coefficients.

use crate::error::{PssError, Result};
use crate::linalg::gauss_legendre;
use crate::model::{FieldVector, StiffnessSet};
use crate::multiindex::{IndexSet, MultiIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// `(P_k(t), L_k(t))` with `P_k(1) = 1` and `L_k = sqrt(2k+1) P_k`.
pub fn legendre_1d(k: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    let p = match k {
        0 => 1.0,
        1 => t,
        _ => {
            for n in 2..=k {
                let n = n as f64;
                let p2 = ((2.0 * n - 1.0) * t * p1 - (n - 1.0) * p0) / n;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    (p, (2.0 * k as f64 + 1.0).sqrt() * p)
}

/// All `L_0(t), ..., L_k(t)`.
pub fn legendre_all(k: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = t;
    }
    for n in 2..=k {
        let nf = n as f64;
        p[n] = ((2.0 * nf - 1.0) * t * p[n - 1] - (nf - 1.0) * p[n - 2]) / nf;
    }
    p.iter()
        .enumerate()
        .map(|(n, v)| (2.0 * n as f64 + 1.0).sqrt() * v)
        .collect()
}

/// `theta(t) = pi t / (2 (t - 1))` for `t > 1`.
pub fn theta(t: f64) -> f64 {
    PI * t / (2.0 * (t - 1.0))
}

/// `prod_{j in supp} theta(rho_j) (1+2 nu_j)^power rho_j^{-nu_j}`; `power` is
/// 1 for the `w` coefficients and 1/2 for the `v` coefficients.
pub fn legendre_bound(nu: &MultiIndex, rho: &[(usize, f64)], power: f64) -> f64 {
    nu.pairs()
        .iter()
        .map(|&(j, e)| {
            let r = rho.iter().find(|&&(k, _)| k == j).map(|&(_, r)| r).unwrap_or(1.0);
            theta(r) * (1.0 + 2.0 * e as f64).powf(power) * r.powi(-(e as i32))
        })
        .product()
}

/// Monotone surrogate for `||w_nu||_V` built from `b_j = ||psi_j||_inf`.
///
/// Positions `j <= split` form the set `E`, larger positions the set `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneLegendre {
    pub b: Vec<f64>,
    pub eps: f64,
    pub kappa: f64,
    pub beta: f64,
    pub eta: f64,
    pub split: usize,
}

impl MonotoneLegendre {
    /// `omitted_tail` bounds `sum_{j > b.len()} b_j` for terms absent from `b`.
    pub fn new(b: &[f64], eps: f64, omitted_tail: f64) -> Result<Self> {
        if !(eps > 0.0) || b.iter().any(|&x| !(x > 0.0)) {
            return Err(PssError::Config("need eps > 0 and positive norms".into()));
        }
        let l1: f64 = b.iter().sum::<f64>() + omitted_tail;
        let kappa = 1.0 + eps / (3.0 * l1);
        let beta = (2.0 * E).max(3.0 * theta(kappa) * E);
        let threshold = eps / (3.0 * beta);
        let mut split = None;
        for j in 0..=b.len() {
            let tail: f64 = b[j..].iter().sum::<f64>() + omitted_tail;
            if tail <= threshold {
                split = Some(j);
                break;
            }
        }
        let split = split.ok_or_else(|| {
            PssError::TruncationInsufficient(format!(
                "omitted tail {omitted_tail:e} exceeds {threshold:e}"
            ))
        })?;
        Ok(Self {
            b: b.to_vec(),
            eps,
            kappa,
            beta,
            eta: (1.0 + kappa) / (2.0 * kappa),
            split,
        })
    }

    fn nu_f(&self, nu: &MultiIndex) -> u32 {
        nu.pairs()
            .iter()
            .filter(|&&(j, _)| j > self.split)
            .map(|&(_, e)| e)
            .sum()
    }

    /// Normalized surrogate value (1 at `nu = 0`); 0 beyond the known norms.
    pub fn value(&self, nu: &MultiIndex) -> f64 {
        if nu.max_position() > self.b.len() {
            return 0.0;
        }
        let nf = self.nu_f(nu) as f64;
        let tk = theta(self.kappa);
        nu.pairs()
            .iter()
            .map(|&(j, e)| {
                let e = e as f64;
                if j <= self.split {
                    self.eta.powf(e)
                } else {
                    let base = self.beta + self.eps * e / (3.0 * self.b[j - 1] * nf);
                    tk * (1.0 + 2.0 * e) * base.powf(-e)
                }
            })
            .product()
    }

    /// Radii `rho(nu)` used in the construction; they satisfy
    /// `sum_j (rho_j - 1) b_j <= eps`.
    pub fn radii(&self, nu: &MultiIndex) -> Vec<(usize, f64)> {
        let nf = self.nu_f(nu) as f64;
        nu.pairs()
            .iter()
            .map(|&(j, e)| {
                if j <= self.split {
                    (j, self.kappa)
                } else {
                    (
                        j,
                        self.kappa + self.beta + self.eps * e as f64 / (3.0 * self.b[j - 1] * nf),
                    )
                }
            })
            .collect()
    }

    /// Checks `value(nu + e_j) <= value(nu)` for `j <= dims`.
    pub fn check_monotone_at(&self, nu: &MultiIndex, dims: usize) -> Result<()> {
        let v = self.value(nu);
        for j in 1..=dims {
            let up = nu.plus_unit(j);
            let vu = self.value(&up);
            if vu > v * (1.0 + 1e-12) {
                return Err(PssError::SurrogateViolation(format!(
                    "legendre surrogate grows from {nu} to {up}"
                )));
            }
        }
        Ok(())
    }
}

/// Legendre coefficients on an index set.
#[derive(Clone, Debug)]
pub struct LegendreCoefficients {
    pub set: IndexSet,
    pub v: Vec<FieldVector>,
    pub w: Vec<FieldVector>,
    pub nodes: usize,
}

const MAX_NODES: usize = 1_000_000;

/// Tensor Gauss-Legendre coefficients `v_nu = int f L_nu dmu` of a vector
/// valued `f` over `[-1,1]^dims` with the uniform probability measure.
pub fn legendre_coeffs_fn<F>(
    f: F,
    set: &IndexSet,
    dims: usize,
    nodes_per_dim: usize,
) -> Result<LegendreCoefficients>
where
    F: Fn(&[f64]) -> Result<FieldVector> + Sync,
{
    if set.max_active_dim() > dims {
        return Err(PssError::MalformedInput(format!(
            "index set uses position {} beyond {dims}",
            set.max_active_dim()
        )));
    }
    let deg = set.max_degree() as usize;
    if nodes_per_dim < deg + 1 {
        return Err(PssError::Config(format!(
            "{nodes_per_dim} nodes per dimension cannot resolve degree {deg}"
        )));
    }
    let total = (nodes_per_dim as f64).powi(dims as i32);
    if total > MAX_NODES as f64 {
        return Err(PssError::CostGuard(format!("{total} quadrature nodes exceed {MAX_NODES}")));
    }
    let total = total as usize;
    let (x, w) = gauss_legendre(nodes_per_dim);
    let lvals: Vec<Vec<f64>> = x.iter().map(|&t| legendre_all(deg, t)).collect();
    let members = set.members().to_vec();

    const CHUNK: usize = 64;
    let n_chunks = total.div_ceil(CHUNK);
    let partials: Vec<Result<Vec<FieldVector>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc: Vec<FieldVector> = Vec::new();
            for q in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut idx = q;
                let mut ids = vec![0usize; dims];
                for slot in ids.iter_mut() {
                    *slot = idx % nodes_per_dim;
                    idx /= nodes_per_dim;
                }
                let y: Vec<f64> = ids.iter().map(|&i| x[i]).collect();
                let wq: f64 = ids.iter().map(|&i| 0.5 * w[i]).product();
                let u = f(&y)?;
                if acc.is_empty() {
                    acc = vec![vec![0.0; u.len()]; members.len()];
                }
                for (k, nu) in members.iter().enumerate() {
                    let lw: f64 = nu
                        .pairs()
                        .iter()
                        .map(|&(j, e)| lvals[ids[j - 1]][e as usize])
                        .product::<f64>()
                        * wq;
                    for (a, ui) in acc[k].iter_mut().zip(&u) {
                        *a += lw * ui;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut v: Vec<FieldVector> = Vec::new();
    for p in partials {
        let p = p?;
        if v.is_empty() {
            v = p;
        } else {
            for (vk, pk) in v.iter_mut().zip(p) {
                for (a, b) in vk.iter_mut().zip(pk) {
                    *a += b;
                }
            }
        }
    }
    let w_coef = members
        .iter()
        .zip(&v)
        .map(|(nu, vk)| {
            let s: f64 = nu
                .pairs()
                .iter()
                .map(|&(_, e)| (1.0 + 2.0 * e as f64).sqrt())
                .product();
            vk.iter().map(|a| a * s).collect()
        })
        .collect();
    Ok(LegendreCoefficients {
        set: set.clone(),
        v,
        w: w_coef,
        nodes: total,
    })
}

/// Legendre coefficients of `y -> u_h(y)` over the first `dims` parameters,
/// with the remaining parameters fixed at 0.
pub fn legendre_coeffs_quadrature(
    stiff: &StiffnessSet,
    set: &IndexSet,
    dims: usize,
    nodes_per_dim: usize,
) -> Result<LegendreCoefficients> {
    if dims > 4 || dims > stiff.dims() {
        return Err(PssError::CostGuard(format!(
            "quadrature limited to 4 active dimensions within the model, got {dims}"
        )));
    }
    legendre_coeffs_fn(|y| stiff.solve(y), set, dims, nodes_per_dim)
}
