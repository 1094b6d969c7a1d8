//! P1 finite elements for `-(a u')' = f` on `(0,1)` with homogeneous
//! Dirichlet conditions and an affine coefficient `a(y) = abar + sum_j y_j psi_j`.
//!
//! Coefficients are sampled at element midpoints, so every stiffness matrix
//! is tridiagonal and exact for piecewise-constant data.

use crate::error::{PssError, Result};
use crate::linalg::{LdlTridiag, SymTridiag};
use serde::{Deserialize, Serialize};

/// Nodal coefficients of a finite-element function (interior nodes only).
pub type FieldVector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FemSpace {
    pub n_h: usize,
    pub h: f64,
}

impl FemSpace {
    pub fn new(n_h: usize) -> Result<Self> {
        if n_h < 3 {
            return Err(PssError::Config(format!("N_h = {n_h} is below 3")));
        }
        Ok(Self {
            n_h,
            h: 1.0 / (n_h as f64 + 1.0),
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_h + 1
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_elements()).map(|e| (e as f64 + 0.5) * self.h).collect()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n_h).map(|i| i as f64 * self.h).collect()
    }

    /// Stiffness matrix of a coefficient given per element.
    pub fn stiffness(&self, coef: &[f64]) -> SymTridiag {
        let n = self.n_h;
        let mut m = SymTridiag::zeros(n);
        for i in 0..n {
            m.diag[i] = (coef[i] + coef[i + 1]) / self.h;
            if i + 1 < n {
                m.off[i] = -coef[i + 1] / self.h;
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiKind {
    DisjointIndicator,
    GlobalSmooth,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineCoefficientFamily {
    /// `abar` per element.
    pub abar: Vec<f64>,
    /// `psi_j` per element, sorted by non-increasing sup norm.
    pub psis: Vec<Vec<f64>>,
    pub kinds: Vec<PsiKind>,
    pub psi_norms: Vec<f64>,
    /// Upper bound on `sup_x sum_{j>J} |psi_j(x)| / abar(x)` for terms that
    /// the family omits (0 when the family is exactly finite).
    pub truncation_tail: f64,
}

impl AffineCoefficientFamily {
    pub fn new(abar: Vec<f64>, psis: Vec<Vec<f64>>, kinds: Vec<PsiKind>) -> Result<Self> {
        if psis.iter().any(|p| p.len() != abar.len()) || kinds.len() != psis.len() {
            return Err(PssError::MalformedInput("inconsistent coefficient sampling".into()));
        }
        let norms: Vec<f64> = psis
            .iter()
            .map(|p| p.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        let mut order: Vec<usize> = (0..psis.len()).collect();
        order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());
        Ok(Self {
            abar,
            psis: order.iter().map(|&k| psis[k].clone()).collect(),
            kinds: order.iter().map(|&k| kinds[k]).collect(),
            psi_norms: order.iter().map(|&k| norms[k]).collect(),
            truncation_tail: 0.0,
        })
    }

    /// `abar = 1` and `psi_j = theta_j` on the j-th of `thetas.len()` equal subintervals.
    pub fn disjoint(space: &FemSpace, thetas: &[f64]) -> Result<Self> {
        let d = thetas.len();
        let ne = space.n_elements();
        if d == 0 || ne % d != 0 {
            return Err(PssError::Config(format!(
                "mesh with {ne} elements is not aligned with {d} inclusions"
            )));
        }
        let per = ne / d;
        let psis = thetas
            .iter()
            .enumerate()
            .map(|(j, &t)| (0..ne).map(|e| if e / per == j { t } else { 0.0 }).collect())
            .collect();
        Self::new(vec![1.0; ne], psis, vec![PsiKind::DisjointIndicator; d])
    }

    /// `abar = 1` and a single constant `psi_1 = theta`.
    pub fn constant(space: &FemSpace, theta: f64) -> Result<Self> {
        let ne = space.n_elements();
        Self::new(vec![1.0; ne], vec![vec![theta; ne]], vec![PsiKind::Custom])
    }

    /// `abar = 1`, `psi_j = c j^{-beta} sin(j pi x)` for `j <= dims`, with `c`
    /// chosen so that the sampled ellipticity constant equals `r_target`.
    pub fn smooth(space: &FemSpace, dims: usize, beta: f64, r_target: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r_target) || r_target == 0.0 {
            return Err(PssError::Config(format!("r_target = {r_target} must lie in (0,1)")));
        }
        let mids = space.midpoints();
        let raw: Vec<Vec<f64>> = (1..=dims)
            .map(|j| {
                let w = (j as f64).powf(-beta);
                mids.iter()
                    .map(|&x| w * (j as f64 * std::f64::consts::PI * x).sin())
                    .collect()
            })
            .collect();
        let peak = (0..mids.len())
            .map(|e| raw.iter().map(|p| p[e].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let c = (1.0 - r_target) / peak;
        let psis = raw
            .into_iter()
            .map(|p| p.into_iter().map(|v| c * v).collect())
            .collect();
        let mut fam = Self::new(vec![1.0; mids.len()], psis, vec![PsiKind::GlobalSmooth; dims])?;
        fam.truncation_tail = if beta > 1.0 {
            c * (dims as f64).powf(1.0 - beta) / (beta - 1.0)
        } else {
            f64::INFINITY
        };
        Ok(fam)
    }

    pub fn dims(&self) -> usize {
        self.psis.len()
    }

    /// `min_x (abar(x) - sum_j |psi_j(x)|)`
    pub fn check_uea(&self) -> f64 {
        (0..self.abar.len())
            .map(|e| self.abar[e] - self.psis.iter().map(|p| p[e].abs()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn abar_max(&self) -> f64 {
        self.abar.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn abar_min(&self) -> f64 {
        self.abar.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_x (abar(x) + sum_j |psi_j(x)|)`, the largest value of `a(y)`.
    pub fn a_max(&self) -> f64 {
        (0..self.abar.len())
            .map(|e| self.abar[e] + self.psis.iter().map(|p| p[e].abs()).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup_x sum_{j > J} |psi_j(x)| / abar(x)` including the omitted tail.
    pub fn relative_tail(&self, from: usize) -> f64 {
        let sampled = (0..self.abar.len())
            .map(|e| {
                self.psis
                    .iter()
                    .skip(from)
                    .map(|p| p[e].abs())
                    .sum::<f64>()
                    / self.abar[e]
            })
            .fold(0.0, f64::max);
        sampled + self.truncation_tail
    }

    /// `a(y)` per element.
    pub fn coefficient(&self, y: &[f64]) -> Vec<f64> {
        let mut a = self.abar.clone();
        for (yj, p) in y.iter().zip(&self.psis) {
            for (ae, pe) in a.iter_mut().zip(p) {
                *ae += yj * pe;
            }
        }
        a
    }
}

/// Right-hand side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Load {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl Default for Load {
    fn default() -> Self {
        Load::Constant(1.0)
    }
}

/// Assembled truth model.
#[derive(Clone, Debug)]
pub struct StiffnessSet {
    pub space: FemSpace,
    pub family: AffineCoefficientFamily,
    pub bbar: SymTridiag,
    pub bjs: Vec<SymTridiag>,
    pub abs_bjs: Vec<SymTridiag>,
    /// Stiffness of the unit coefficient; defines the V inner product.
    pub lap: SymTridiag,
    pub f: Vec<f64>,
    pub r: f64,
    bbar_fact: LdlTridiag,
    lap_fact: LdlTridiag,
}

impl StiffnessSet {
    pub fn assemble(family: AffineCoefficientFamily, space: FemSpace, load: &Load) -> Result<Self> {
        if family.abar.len() != space.n_elements() {
            return Err(PssError::MalformedInput("coefficient sampling does not match mesh".into()));
        }
        let r = family.check_uea();
        if !(r > 0.0) {
            return Err(PssError::UeaViolated(r));
        }
        let f = match load {
            Load::Constant(c) => vec![c * space.h; space.n_h],
            Load::Nodal(v) => {
                if v.len() != space.n_h {
                    return Err(PssError::Config(format!(
                        "nodal load has {} entries, expected {}",
                        v.len(),
                        space.n_h
                    )));
                }
                v.iter().map(|x| x * space.h).collect()
            }
        };
        let bbar = space.stiffness(&family.abar);
        let bjs = family.psis.iter().map(|p| space.stiffness(p)).collect();
        let abs_bjs = family
            .psis
            .iter()
            .map(|p| space.stiffness(&p.iter().map(|v| v.abs()).collect::<Vec<_>>()))
            .collect();
        let lap = space.stiffness(&vec![1.0; space.n_elements()]);
        let bbar_fact = bbar
            .factor()
            .map_err(|e| PssError::Numerical(format!("abar stiffness: {e}")))?;
        let lap_fact = lap.factor()?;
        Ok(Self {
            space,
            family,
            bbar,
            bjs,
            abs_bjs,
            lap,
            f,
            r,
            bbar_fact,
            lap_fact,
        })
    }

    pub fn dims(&self) -> usize {
        self.bjs.len()
    }

    pub fn n_h(&self) -> usize {
        self.space.n_h
    }

    pub fn abar_max(&self) -> f64 {
        self.family.abar_max()
    }

    /// `Bbar + sum_j y_j B_j`
    pub fn operator(&self, y: &[f64]) -> Result<SymTridiag> {
        if y.len() > self.dims() {
            return Err(PssError::MalformedInput(format!(
                "parameter has {} entries, model has {}",
                y.len(),
                self.dims()
            )));
        }
        if y.iter().any(|v| !(v.abs() <= 1.0 + 1e-12)) {
            return Err(PssError::MalformedInput("parameter outside [-1,1]".into()));
        }
        let mut a = self.bbar.clone();
        for (yj, bj) in y.iter().zip(&self.bjs) {
            if *yj != 0.0 {
                a.add_scaled(*yj, bj);
            }
        }
        Ok(a)
    }

    /// Truth solution `u_h(y)`.
    pub fn solve(&self, y: &[f64]) -> Result<FieldVector> {
        let a = self.operator(y)?;
        Ok(a.factor()?.solve(&self.f))
    }

    /// Applies `Bbar^{-1}`.
    pub fn solve_bbar(&self, rhs: &[f64]) -> FieldVector {
        self.bbar_fact.solve(rhs)
    }

    /// Applies the inverse of the unit-coefficient stiffness.
    pub fn solve_lap(&self, rhs: &[f64]) -> FieldVector {
        self.lap_fact.solve(rhs)
    }

    /// Maps `v` to Euclidean coordinates of the V inner product.
    pub fn v_coords(&self, v: &[f64]) -> Vec<f64> {
        self.lap_fact.apply_rt(v)
    }

    /// Maps `v` to Euclidean coordinates of the `abar` energy inner product.
    pub fn abar_coords(&self, v: &[f64]) -> Vec<f64> {
        self.bbar_fact.apply_rt(v)
    }

    pub fn v_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.lap.bilinear(a, b)
    }

    pub fn v_norm(&self, v: &[f64]) -> f64 {
        self.lap.quad_form(v).max(0.0).sqrt()
    }

    pub fn abar_norm(&self, v: &[f64]) -> f64 {
        let a2 = self.bbar.quad_form(v).max(0.0);
        debug_assert!({
            let v2 = self.lap.quad_form(v);
            let tol = 1e-12 * (1.0 + v2);
            self.r * v2 <= a2 + tol && a2 <= self.abar_max() * v2 + tol
        });
        a2.sqrt()
    }

    /// Dual norm of a load vector: `sqrt(g^T L^{-1} g)`.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        crate::linalg::dot(g, &self.solve_lap(g)).max(0.0).sqrt()
    }

    /// Discrete `||f||_{V*}`.
    pub fn load_dual_norm(&self) -> f64 {
        self.dual_norm(&self.f)
    }
}
