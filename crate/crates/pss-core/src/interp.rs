//! Sparse interpolation on tensorized Leja grids.
//!
//! For a downward-closed `Lambda` the interpolant is
//! `I u = sum_nu alpha_nu H_nu` with `H_nu(y) = prod_j h_{nu_j}(y_j)` and
//! `h_k(t) = prod_{l<k} (t - t_l) / (t_k - t_l)`.

use crate::error::{PssError, Result};
use crate::linalg::{axpy, gauss_legendre};
use crate::model::{FieldVector, StiffnessSet};
use crate::multiindex::{anchored_neighbors, IndexSet, MultiIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    Leja,
    Rleja,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnivariateSequence {
    pub kind: SequenceKind,
    pub points: Vec<f64>,
    /// `prod_{l<k} (t_k - t_l)`
    denoms: Vec<f64>,
}

/// Relative gap below which two log-products count as equal.
const TIE: f64 = 1e-10;

fn better(cand: f64, best: f64) -> bool {
    if best == f64::NEG_INFINITY {
        return cand > best;
    }
    cand > best + TIE * (1.0 + best.abs())
}

impl UnivariateSequence {
    pub fn custom(points: Vec<f64>) -> Result<Self> {
        Self::build(SequenceKind::Custom, points)
    }

    fn build(kind: SequenceKind, points: Vec<f64>) -> Result<Self> {
        for (k, &t) in points.iter().enumerate() {
            if !(t.abs() <= 1.0) {
                return Err(PssError::MalformedInput(format!("point {t} outside [-1,1]")));
            }
            if points[..k].iter().any(|&s| s == t) {
                return Err(PssError::MalformedInput(format!("point {t} repeated")));
            }
        }
        let denoms = (0..points.len())
            .map(|k| points[..k].iter().map(|&s| points[k] - s).product())
            .collect();
        Ok(Self {
            kind,
            points,
            denoms,
        })
    }

    /// Leja points `t_0 = 1, t_k = argmax prod_{l<k} |t - t_l|`, found on a
    /// Chebyshev grid and refined by three local passes. Ties go to the
    /// smaller `t`.
    pub fn leja(k_max: usize, grid_size: usize) -> Self {
        let n = grid_size.max(3) | 1;
        let mut grid: Vec<f64> = (0..n)
            .map(|i| -(std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .collect();
        grid[n / 2] = 0.0;
        grid[0] = -1.0;
        grid[n - 1] = 1.0;
        let mut pts = vec![1.0];
        let mut logp: Vec<f64> = grid.iter().map(|&g| (g - 1.0).abs().ln()).collect();
        let log_at = |t: f64, pts: &[f64]| pts.iter().map(|&s| (t - s).abs().ln()).sum::<f64>();
        while pts.len() <= k_max {
            let mut bi = 0;
            for i in 1..n {
                if better(logp[i], logp[bi]) {
                    bi = i;
                }
            }
            let mut best = grid[bi];
            let mut best_v = log_at(best, &pts);
            let mut lo = grid[bi.saturating_sub(1)];
            let mut hi = grid[(bi + 1).min(n - 1)];
            for _ in 0..3 {
                const SUB: usize = 100;
                let step = (hi - lo) / SUB as f64;
                for s in 0..=SUB {
                    let t = lo + s as f64 * step;
                    let v = log_at(t, &pts);
                    if v > best_v + 1e-15 * (1.0 + best_v.abs()) {
                        best = t;
                        best_v = v;
                    }
                }
                lo = (best - step).max(-1.0);
                hi = (best + step).min(1.0);
            }
            for (l, &g) in logp.iter_mut().zip(&grid) {
                *l += (g - best).abs().ln();
            }
            pts.push(best);
        }
        Self::build(SequenceKind::Leja, pts).expect("Leja points are distinct")
    }

    /// Real projections of the Leja sequence on the unit circle started at 1,
    /// with repeated projections removed.
    pub fn rleja(k_max: usize) -> Self {
        const M: usize = 1 << 16;
        let angles: Vec<f64> = (0..M).map(|i| 2.0 * std::f64::consts::PI * i as f64 / M as f64).collect();
        let mut logp: Vec<f64> = angles.iter().map(|&a| circle_log_dist(a, 0.0)).collect();
        let mut pts = vec![1.0f64];
        while pts.len() <= k_max {
            let mut bi = 0;
            for i in 1..M {
                if better(logp[i], logp[bi]) {
                    bi = i;
                }
            }
            let a = angles[bi];
            for (l, &b) in logp.iter_mut().zip(&angles) {
                *l += circle_log_dist(b, a);
            }
            let mut x = a.cos();
            if x.abs() < 1e-14 {
                x = 0.0;
            }
            if !pts.iter().any(|&p| (p - x).abs() < 1e-12) {
                pts.push(x);
            }
        }
        Self::build(SequenceKind::Rleja, pts).expect("projections are deduplicated")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest degree `K` supported.
    pub fn max_degree(&self) -> usize {
        self.points.len() - 1
    }

    pub fn h(&self, k: usize, t: f64) -> f64 {
        self.points[..k].iter().map(|&s| t - s).product::<f64>() / self.denoms[k]
    }

    /// `h_0(t), ..., h_k(t)`
    pub fn h_all(&self, k: usize, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(k + 1);
        let mut prod = 1.0;
        for j in 0..=k {
            out.push(prod / self.denoms[j]);
            prod *= t - self.points[j];
        }
        out
    }

    /// `||h_k||` in `L^2([-1,1], dt/2)`, by exact Gauss-Legendre quadrature.
    pub fn h_l2_norms(&self, k: usize) -> Vec<f64> {
        let (x, w) = gauss_legendre(k + 1);
        let mut acc = vec![0.0; k + 1];
        for (&t, &wt) in x.iter().zip(&w) {
            for (a, h) in acc.iter_mut().zip(self.h_all(k, t)) {
                *a += 0.5 * wt * h * h;
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// `||h_k||_inf`, exactly 1 for Leja points and probed otherwise.
    pub fn h_sup_norms(&self, k: usize) -> Vec<f64> {
        if self.kind == SequenceKind::Leja {
            return vec![1.0; k + 1];
        }
        let mut acc = vec![0.0f64; k + 1];
        for i in 0..=20_000 {
            let t = -1.0 + 2.0 * i as f64 / 20_000.0;
            for (a, h) in acc.iter_mut().zip(self.h_all(k, t)) {
                *a = a.max(h.abs());
            }
        }
        acc
    }
}

fn circle_log_dist(a: f64, b: f64) -> f64 {
    (2.0 * ((a - b) / 2.0).sin().abs()).ln()
}

/// Probed Lebesgue constant of the nodes `t_0..t_k` on `probe_size`
/// equispaced points of `[-1,1]`; a lower bound of the true constant.
pub fn lebesgue_constant_1d(seq: &UnivariateSequence, k: usize, probe_size: usize) -> f64 {
    let x = &seq.points[..=k];
    let w: Vec<f64> = (0..=k)
        .map(|i| {
            1.0 / (0..=k)
                .filter(|&l| l != i)
                .map(|l| x[i] - x[l])
                .product::<f64>()
        })
        .collect();
    let n = probe_size.max(2);
    (0..n)
        .into_par_iter()
        .map(|p| {
            let t = -1.0 + 2.0 * p as f64 / (n - 1) as f64;
            if x.iter().any(|&xi| xi == t) {
                return 1.0;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let q = wi / (t - xi);
                num += q.abs();
                den += q;
            }
            num / den.abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Vector-valued map to interpolate.
pub trait Target: Sync {
    fn dims(&self) -> usize;
    fn eval(&self, y: &[f64]) -> Result<FieldVector>;
    fn norm(&self, v: &[f64]) -> f64;
}

impl Target for StiffnessSet {
    fn dims(&self) -> usize {
        StiffnessSet::dims(self)
    }
    fn eval(&self, y: &[f64]) -> Result<FieldVector> {
        self.solve(y)
    }
    fn norm(&self, v: &[f64]) -> f64 {
        self.v_norm(v)
    }
}

/// A closure target measured in the Euclidean norm.
pub struct FnTarget<F> {
    pub dims: usize,
    pub f: F,
}

impl<F> Target for FnTarget<F>
where
    F: Fn(&[f64]) -> FieldVector + Sync,
{
    fn dims(&self) -> usize {
        self.dims
    }
    fn eval(&self, y: &[f64]) -> Result<FieldVector> {
        Ok((self.f)(y))
    }
    fn norm(&self, v: &[f64]) -> f64 {
        crate::linalg::norm2(v)
    }
}

#[derive(Clone, Debug)]
pub struct SparseInterpolant {
    pub set: IndexSet,
    pub alphas: Vec<FieldVector>,
    pub seq: UnivariateSequence,
    pub dims: usize,
    /// Truth evaluations spent.
    pub solves: usize,
    trunks: Vec<Option<usize>>,
}

/// `y_nu = (t_{nu_1}, ..., t_{nu_dims})`
pub fn grid_point(seq: &UnivariateSequence, nu: &MultiIndex, dims: usize) -> Vec<f64> {
    (1..=dims).map(|j| seq.points[nu.get(j) as usize]).collect()
}

fn trunk_of(set: &IndexSet, nu: &MultiIndex) -> Option<usize> {
    let j = nu.max_position();
    if j == 0 {
        return None;
    }
    let mut pairs = nu.pairs().to_vec();
    pairs.pop();
    let t = MultiIndex::from_pairs(&pairs).unwrap();
    Some(set.position(&t).expect("downward closed"))
}

fn check_degree(set: &IndexSet, seq: &UnivariateSequence) -> Result<()> {
    let need = set.max_degree() as usize;
    if need > seq.max_degree() {
        return Err(PssError::SequenceTooShort {
            need,
            have: seq.max_degree(),
        });
    }
    Ok(())
}

/// `H_nu(y)` for all members, one product per index along trunks.
fn basis_values(set: &IndexSet, trunks: &[Option<usize>], seq: &UnivariateSequence, y: &[f64]) -> Vec<f64> {
    let deg = set.max_degree() as usize;
    let dims = set.max_active_dim();
    let tab: Vec<Vec<f64>> = (0..dims)
        .map(|j| seq.h_all(deg, y.get(j).copied().unwrap_or(seq.points[0])))
        .collect();
    let mut hv = vec![0.0; set.len()];
    for k in 0..set.len() {
        hv[k] = match trunks[k] {
            None => 1.0,
            Some(t) => {
                let (j, e) = *set.get(k).pairs().last().unwrap();
                hv[t] * tab[j - 1][e as usize]
            }
        };
    }
    hv
}

impl SparseInterpolant {
    /// Builds from data values at the grid points of `set` (in set order).
    fn from_values(set: IndexSet, seq: UnivariateSequence, dims: usize, values: Vec<FieldVector>) -> Self {
        let trunks: Vec<_> = set.iter().map(|nu| trunk_of(&set, nu)).collect();
        let mut alphas: Vec<FieldVector> = Vec::with_capacity(set.len());
        for (k, nu) in set.iter().enumerate() {
            let y = grid_point(&seq, nu, dims);
            let hv = basis_values(&set, &trunks, &seq, &y);
            let mut a = values[k].clone();
            for (m, al) in alphas.iter().enumerate() {
                if hv[m] != 0.0 {
                    axpy(-hv[m], al, &mut a);
                }
            }
            alphas.push(a);
        }
        let solves = set.len();
        Self {
            set,
            alphas,
            seq,
            dims,
            solves,
            trunks,
        }
    }

    pub fn basis(&self, y: &[f64]) -> Vec<f64> {
        basis_values(&self.set, &self.trunks, &self.seq, y)
    }

    pub fn evaluate(&self, y: &[f64]) -> FieldVector {
        let hv = self.basis(y);
        let mut u = vec![0.0; self.alphas.first().map_or(0, |a| a.len())];
        for (h, a) in hv.iter().zip(&self.alphas) {
            if *h != 0.0 {
                axpy(*h, a, &mut u);
            }
        }
        u
    }

    /// The interpolant restricted to the first `n` members.
    pub fn prefix(&self, n: usize) -> SparseInterpolant {
        let set = IndexSet::from_ordered(self.set.members()[..n].to_vec()).unwrap();
        SparseInterpolant {
            trunks: self.trunks[..n].to_vec(),
            alphas: self.alphas[..n].to_vec(),
            seq: self.seq.clone(),
            dims: self.dims,
            solves: n,
            set,
        }
    }

    pub fn grid(&self) -> Vec<Vec<f64>> {
        self.set.iter().map(|nu| grid_point(&self.seq, nu, self.dims)).collect()
    }

    /// Probed `sup_y sum_nu |l_nu(y)|` over the given points.
    pub fn lebesgue_probe(&self, probes: &[Vec<f64>]) -> f64 {
        lebesgue_probe(&self.set, &self.seq, probes)
    }
}

/// Interpolates `target` on the grid of `set`, one truth evaluation per index.
pub fn interpolate<T: Target + ?Sized>(
    target: &T,
    set: &IndexSet,
    seq: &UnivariateSequence,
) -> Result<SparseInterpolant> {
    check_degree(set, seq)?;
    let dims = target.dims();
    if set.max_active_dim() > dims {
        return Err(PssError::MalformedInput(format!(
            "index set uses position {} beyond {dims}",
            set.max_active_dim()
        )));
    }
    let values = set
        .members()
        .par_iter()
        .map(|nu| target.eval(&grid_point(seq, nu, dims)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseInterpolant::from_values(set.clone(), seq.clone(), dims, values))
}

/// Probed multivariate Lebesgue constant of the grid of `set`.
pub fn lebesgue_probe(set: &IndexSet, seq: &UnivariateSequence, probes: &[Vec<f64>]) -> f64 {
    let n = set.len();
    let dims = set.max_active_dim();
    let trunks: Vec<_> = set.iter().map(|nu| trunk_of(set, nu)).collect();
    // m[i][k] = H_k(y_i), lower triangular with unit diagonal.
    let m: Vec<Vec<f64>> = set
        .iter()
        .map(|nu| basis_values(set, &trunks, seq, &grid_point(seq, nu, dims)))
        .collect();
    probes
        .par_iter()
        .map(|y| {
            let mut l = basis_values(set, &trunks, seq, y);
            // Solve m^T l = H(y) (upper triangular, unit diagonal).
            for i in (0..n).rev() {
                let li = l[i] / m[i][i];
                l[i] = li;
                for k in 0..i {
                    l[k] -= m[i][k] * li;
                }
            }
            l.iter().map(|v| v.abs()).sum::<f64>()
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightNorm {
    Inf,
    L2,
}

/// Outcome of the alternating greedy run: the k-th iterate is
/// `interp.prefix(k + 1)`.
#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub interp: SparseInterpolant,
    /// Truth evaluations spent after each step (frontier included).
    pub solves: Vec<usize>,
}

/// Alternating greedy interpolation: even steps take the frontier index with
/// the largest `c_nu ||alpha_nu||`, odd steps the one that entered the
/// frontier first.
pub fn adaptive_interpolate<T: Target + ?Sized>(
    target: &T,
    n_max: usize,
    weight: WeightNorm,
    seq: &UnivariateSequence,
) -> Result<AdaptiveRun> {
    let dims = target.dims();
    let kmax = seq.max_degree();
    let hn = match weight {
        WeightNorm::Inf => seq.h_sup_norms(kmax),
        WeightNorm::L2 => seq.h_l2_norms(kmax),
    };
    let c_of = |nu: &MultiIndex| -> f64 { nu.pairs().iter().map(|&(_, e)| hn[e as usize]).product() };

    let mut set = IndexSet::root();
    let mut values = vec![target.eval(&grid_point(seq, &MultiIndex::zero(), dims))?];
    let mut interp = SparseInterpolant::from_values(set.clone(), seq.clone(), dims, values.clone());
    let mut solves = vec![1usize];
    let mut total = 1usize;
    // frontier: index -> (entry step, alpha, value)
    let mut frontier: BTreeMap<MultiIndex, (usize, FieldVector, FieldVector)> = BTreeMap::new();

    let refresh = |set: &IndexSet,
                       interp: &SparseInterpolant,
                       frontier: &mut BTreeMap<MultiIndex, (usize, FieldVector, FieldVector)>,
                       step: usize|
     -> Result<usize> {
        let new: Vec<MultiIndex> = anchored_neighbors(set)
            .into_iter()
            .filter(|nu| !frontier.contains_key(nu) && nu.max_position() <= dims)
            .collect();
        for nu in &new {
            if nu.get(nu.max_position()) as usize > kmax {
                return Err(PssError::SequenceTooShort {
                    need: nu.order() as usize,
                    have: kmax,
                });
            }
        }
        let vals = new
            .par_iter()
            .map(|nu| target.eval(&grid_point(seq, nu, dims)))
            .collect::<Result<Vec<_>>>()?;
        for (nu, v) in new.iter().zip(vals) {
            let mut a = v.clone();
            let ip = interp.evaluate(&grid_point(seq, nu, dims));
            axpy(-1.0, &ip, &mut a);
            frontier.insert(nu.clone(), (step, a, v));
        }
        Ok(new.len())
    };

    total += refresh(&set, &interp, &mut frontier, 1)?;
    for n in 2..=n_max {
        if frontier.is_empty() {
            break;
        }
        let pick = if n % 2 == 0 {
            frontier
                .iter()
                .fold(None::<(&MultiIndex, f64)>, |acc, (nu, (_, a, _))| {
                    let s = c_of(nu) * target.norm(a);
                    match acc {
                        Some((_, b)) if b >= s => acc,
                        _ => Some((nu, s)),
                    }
                })
                .map(|(nu, _)| nu.clone())
        } else {
            frontier
                .iter()
                .fold(None::<(&MultiIndex, usize)>, |acc, (nu, (k, _, _))| match acc {
                    Some((_, b)) if b <= *k => acc,
                    _ => Some((nu, *k)),
                })
                .map(|(nu, _)| nu.clone())
        }
        .unwrap();
        let (_, alpha, value) = frontier.remove(&pick).unwrap();
        set.insert(pick.clone())?;
        values.push(value);
        interp.trunks.push(trunk_of(&set, &pick));
        interp.alphas.push(alpha);
        interp.set = set.clone();
        interp.solves = set.len();
        if n < n_max {
            total += refresh(&set, &interp, &mut frontier, n)?;
        }
        solves.push(total);
    }
    interp.solves = total;
    Ok(AdaptiveRun { interp, solves })
}
