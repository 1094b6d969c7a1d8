//! Weak greedy selection on finite vector families and the reduced basis
//! built from it on the parametric model.
//!
//! Vectors are stored in Euclidean coordinates of the chosen inner product,
//! so distances and Gram-Schmidt are plain dot products.

use crate::error::{PssError, Result};
use crate::linalg::{axpy, dot, norm2};
use crate::model::{FieldVector, StiffnessSet};
use crate::sampling;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerProduct {
    Euclidean,
    VNorm,
    AbarNorm,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompactSet {
    pub labels: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub inner: InnerProduct,
}

impl CompactSet {
    pub fn explicit(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.len());
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(PssError::MalformedInput("vectors of unequal length".into()));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(PssError::MalformedInput("non-finite vector entry".into()));
        }
        Ok(Self {
            labels: (0..vectors.len()).map(|i| i.to_string()).collect(),
            vectors,
            inner: InnerProduct::Euclidean,
        })
    }

    /// `{x_j e_j}`
    pub fn diagonal(x: &[f64]) -> Self {
        let m = x.len();
        let vectors = (0..m)
            .map(|j| {
                let mut v = vec![0.0; m];
                v[j] = x[j];
                v
            })
            .collect();
        Self::explicit(vectors).expect("finite entries")
    }

    /// Diagonal set with `x_j = 2^{-ks}` for `2^{k-1} <= j < 2^k`, `k = 1..=levels`.
    pub fn blocks(s: f64, levels: u32) -> Self {
        let x: Vec<f64> = (1..=levels)
            .flat_map(|k| std::iter::repeat(2f64.powf(-(k as f64) * s)).take(1 << (k - 1)))
            .collect();
        Self::diagonal(&x)
    }

    /// `count` vectors in `R^dim` whose coordinate `i` has scale `decay^i`.
    pub fn random<R: Rng>(rng: &mut R, count: usize, dim: usize, decay: f64) -> Self {
        let vectors = (0..count)
            .map(|_| {
                (0..dim)
                    .map(|i| decay.powi(i as i32) * rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        Self::explicit(vectors).expect("finite entries")
    }

    /// Truth snapshots `u_h(y)` in coordinates of `inner`.
    pub fn from_model(stiff: &StiffnessSet, params: &[Vec<f64>], inner: InnerProduct) -> Result<Self> {
        let vectors = params
            .par_iter()
            .map(|y| {
                let u = stiff.solve(y)?;
                Ok(match inner {
                    InnerProduct::Euclidean => u,
                    InnerProduct::VNorm => stiff.v_coords(&u),
                    InnerProduct::AbarNorm => stiff.abar_coords(&u),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels: params.iter().map(|y| format!("{y:?}")).collect(),
            vectors,
            inner,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `d_0 = max ||g||`
    pub fn radius(&self) -> f64 {
        self.vectors.iter().map(|v| norm2(v)).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// The largest distance.
    Maximal,
    /// The smallest distance still at least `gamma sigma_n`.
    Weakest,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub selected: Vec<usize>,
    /// `sigma_0, ..., sigma_n`, one more than the selections.
    pub sigma: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub gamma: f64,
}

/// Residuals below this fraction of `sigma_0` count as zero.
const RANK_TOL: f64 = 1e-12;

fn orthonormalize(basis: &[Vec<f64>], v: &[f64]) -> (Vec<f64>, f64) {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &r);
            axpy(-c, q, &mut r);
        }
    }
    let n = norm2(&r);
    (r, n)
}

pub fn weak_greedy(set: &CompactSet, gamma: f64, n_max: usize, selection: Selection) -> Result<GreedyTrace> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(PssError::Config(format!("gamma = {gamma} must lie in (0,1]")));
    }
    let mut res = set.vectors.clone();
    let mut dist: Vec<f64> = res.iter().map(|v| norm2(v)).collect();
    let sigma0 = dist.iter().copied().fold(0.0, f64::max);
    let mut trace = GreedyTrace {
        selected: vec![],
        sigma: vec![],
        basis: vec![],
        gamma,
    };
    let floor = RANK_TOL * sigma0;
    loop {
        let sigma = dist.iter().copied().fold(0.0, f64::max);
        if sigma <= floor {
            trace.sigma.push(0.0);
            break;
        }
        trace.sigma.push(sigma);
        if trace.selected.len() >= n_max {
            break;
        }
        let pick = match selection {
            Selection::Maximal => (0..dist.len()).find(|&i| dist[i] == sigma).unwrap(),
            Selection::Weakest => {
                let bar = gamma * sigma;
                let mut best = None::<usize>;
                for i in 0..dist.len() {
                    if dist[i] >= bar && best.map_or(true, |b| dist[i] < dist[b]) {
                        best = Some(i);
                    }
                }
                best.unwrap()
            }
        };
        let (mut q, n) = orthonormalize(&trace.basis, &set.vectors[pick]);
        q.iter_mut().for_each(|x| *x /= n);
        res.par_iter_mut().zip(dist.par_iter_mut()).for_each(|(r, d)| {
            let c = dot(&q, r);
            axpy(-c, &q, r);
            *d = norm2(r);
        });
        trace.basis.push(q);
        trace.selected.push(pick);
    }
    Ok(trace)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixReport {
    /// Row `m` holds `a_{m,0..=m}`.
    pub a: Vec<Vec<f64>>,
    pub p1_violations: usize,
    pub p2_violations: usize,
    pub orthogonality_loss: f64,
    pub reorthogonalized: bool,
}

fn gram_schmidt(vectors: &[&[f64]], passes: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut r = v.to_vec();
        for _ in 0..passes {
            for b in &q {
                let c = dot(b, &r);
                axpy(-c, b, &mut r);
            }
        }
        let n = norm2(&r);
        r.iter_mut().for_each(|x| *x /= n);
        q.push(r);
    }
    q
}

fn orthogonality_loss(q: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..q.len() {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&q[i], &q[j]) - target).abs());
        }
    }
    worst
}

/// Lower-triangular `a_{i,j} = <g_i, g*_j>` in selection order, with the
/// diagonal and partial-row-sum properties checked to `1e-10 sigma_0`.
pub fn matrix_trace(set: &CompactSet, trace: &GreedyTrace) -> MatrixReport {
    let g: Vec<&[f64]> = trace.selected.iter().map(|&i| set.vectors[i].as_slice()).collect();
    let mut q = gram_schmidt(&g, 1);
    let mut loss = orthogonality_loss(&q);
    let reorthogonalized = loss > 1e-8;
    if reorthogonalized {
        q = gram_schmidt(&g, 2);
        loss = orthogonality_loss(&q);
    }
    let a: Vec<Vec<f64>> = g
        .iter()
        .enumerate()
        .map(|(m, gm)| (0..=m).map(|j| dot(gm, &q[j])).collect())
        .collect();
    let tol = 1e-10 * trace.sigma.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let mut p1 = 0;
    let mut p2 = 0;
    for n in 0..a.len() {
        let s = trace.sigma[n];
        let d = a[n][n].abs();
        if d < trace.gamma * s - tol || d > s + tol {
            p1 += 1;
        }
        for (m, row) in a.iter().enumerate().skip(n) {
            let partial: f64 = row[n..=m].iter().map(|x| x * x).sum();
            if partial.sqrt() > s + tol {
                p2 += 1;
            }
        }
    }
    MatrixReport {
        a,
        p1_violations: p1,
        p2_violations: p2,
        orthogonality_loss: loss,
        reorthogonalized,
    }
}

/// Singular values of the matrix whose columns are `vectors`.
pub fn singular_values(vectors: &[Vec<f64>]) -> Vec<f64> {
    if vectors.is_empty() {
        return vec![];
    }
    let m = DMatrix::from_fn(vectors[0].len(), vectors.len(), |i, j| vectors[j][i]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// `max_g dist(g, W_n)` where `W_n` is spanned by the top `n` left singular
/// vectors; an upper bound of the Kolmogorov width of the finite set.
pub fn pod_widths(vectors: &[Vec<f64>], n_max: usize) -> Vec<f64> {
    if vectors.is_empty() {
        return vec![0.0; n_max + 1];
    }
    let m = DMatrix::from_fn(vectors[0].len(), vectors.len(), |i, j| vectors[j][i]);
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    (0..=n_max)
        .map(|n| {
            let cols: Vec<usize> = order.iter().take(n).copied().collect();
            vectors
                .iter()
                .map(|v| {
                    let mut r = v.clone();
                    for &c in &cols {
                        let col: Vec<f64> = u.column(c).iter().copied().collect();
                        let coef = dot(&col, &r);
                        axpy(-coef, &col, &mut r);
                    }
                    norm2(&r)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Singular values of truth snapshots at `params` in the given inner product.
pub fn snapshot_widths(stiff: &StiffnessSet, params: &[Vec<f64>], inner: InnerProduct) -> Result<Vec<f64>> {
    Ok(singular_values(&CompactSet::from_model(stiff, params, inner)?.vectors))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainingSet {
    /// Tensor lattice with `k` points per axis, for at most three parameters.
    Lattice { k: usize },
    /// The first `m` Halton points.
    Lds { m: usize },
}

impl TrainingSet {
    pub fn points(&self, dims: usize) -> Result<Vec<Vec<f64>>> {
        match *self {
            TrainingSet::Lattice { k } => {
                if dims > 3 {
                    return Err(PssError::Config(format!(
                        "tensor lattice requested for {dims} parameters; use a low-discrepancy set"
                    )));
                }
                if k < 2 {
                    return Err(PssError::Config("lattice needs at least 2 points per axis".into()));
                }
                Ok(sampling::tensor_lattice(dims, k))
            }
            TrainingSet::Lds { m } => {
                if m == 0 {
                    return Err(PssError::Config("empty training set".into()));
                }
                Ok(sampling::halton(dims, m))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RbConfig {
    pub eps: f64,
    pub train: TrainingSet,
    pub n_max: usize,
    /// Fail when the Lipschitz bound times the probed covering radius exceeds `eps / 3`.
    #[serde(default)]
    pub strict_covering: bool,
}

/// Cea and surrogate constants: `alpha = r`, `R = max_x a_max(x)`,
/// `delta = (alpha/R)^{3/2}`, `beta = R/alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbConstants {
    pub alpha: f64,
    pub r_cont: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub cea: f64,
}

impl RbConstants {
    pub fn new(stiff: &StiffnessSet) -> Self {
        let alpha = stiff.r;
        let r_cont = stiff.family.a_max();
        let delta = (alpha / r_cont).powf(1.5);
        let beta = r_cont / alpha;
        Self {
            alpha,
            r_cont,
            delta,
            beta,
            gamma: delta / beta,
            cea: (r_cont / alpha).sqrt(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedBasis {
    pub dims: usize,
    pub params: Vec<Vec<f64>>,
    pub selected: Vec<usize>,
    /// V-orthonormal basis of the snapshot span; not serialized.
    #[serde(skip)]
    pub basis: Vec<FieldVector>,
    pub bbar_n: Vec<Vec<f64>>,
    pub bj_n: Vec<Vec<Vec<f64>>>,
    pub f_n: Vec<f64>,
    pub constants: RbConstants,
    /// `max_y d(y, V_n)` over the training set for `n = 0, 1, ...`.
    pub surrogate_max: Vec<f64>,
    pub covering_radius: f64,
    pub discretization_bound: f64,
    pub train_size: usize,
    pub solves: usize,
    /// Upper-triangular factor of the surrogate vectors, column by column.
    r_cols: Vec<Vec<f64>>,
}

impl ReducedBasis {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    fn system(&self, y: &[f64], k: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut m = DMatrix::from_fn(k, k, |i, l| self.bbar_n[i][l]);
        for (yj, bj) in y.iter().zip(&self.bj_n) {
            for i in 0..k {
                for l in 0..k {
                    m[(i, l)] += yj * bj[i][l];
                }
            }
        }
        (m, DVector::from_column_slice(&self.f_n[..k]))
    }

    /// Galerkin coefficients in the first `k` basis vectors.
    pub fn coefficients_at(&self, y: &[f64], k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Ok(vec![]);
        }
        let (m, f) = self.system(y, k);
        let sol = match m.clone().cholesky() {
            Some(c) => c.solve(&f),
            None => m
                .lu()
                .solve(&f)
                .ok_or_else(|| PssError::Numerical("singular reduced system".into()))?,
        };
        Ok(sol.iter().copied().collect())
    }

    pub fn lift(&self, coeffs: &[f64]) -> FieldVector {
        let mut u = vec![0.0; self.basis.first().map_or(0, |b| b.len())];
        for (c, q) in coeffs.iter().zip(&self.basis) {
            axpy(*c, q, &mut u);
        }
        u
    }

    /// `d(y, V_k) = ||Bbar^{-1}(F - B(y) U_k(y))||_V` from the stored factor.
    pub fn surrogate_at(&self, y: &[f64], k: usize) -> Result<f64> {
        let alpha = self.coefficients_at(y, k)?;
        Ok(self.surrogate_with(y, &alpha))
    }

    fn surrogate_with(&self, y: &[f64], alpha: &[f64]) -> f64 {
        let j = self.dims;
        let cols = 1 + alpha.len() * (j + 1);
        let mut c = Vec::with_capacity(cols);
        c.push(1.0);
        for &a in alpha {
            c.push(-a);
            for l in 0..j {
                c.push(-a * y.get(l).copied().unwrap_or(0.0));
            }
        }
        let mut out = vec![0.0; cols];
        for (ci, col) in c.iter().zip(&self.r_cols) {
            if *ci != 0.0 {
                for (o, r) in out.iter_mut().zip(col) {
                    *o += ci * r;
                }
            }
        }
        norm2(&out)
    }
}

/// Offline phase: greedy snapshot selection driven by the residual surrogate.
pub fn rb_offline(stiff: &StiffnessSet, cfg: &RbConfig) -> Result<ReducedBasis> {
    if !(cfg.eps > 0.0) {
        return Err(PssError::Config(format!("eps = {} must be positive", cfg.eps)));
    }
    let dims = stiff.dims();
    let train = cfg.train.points(dims)?;
    let constants = RbConstants::new(stiff);
    let probes = sampling::uniform(dims, 4096, 0x5eed);
    let covering_radius = sampling::covering_radius(&train, &probes);
    let lipschitz = stiff.load_dual_norm() / (stiff.r * stiff.r) * stiff.family.psi_norms.iter().sum::<f64>();
    let discretization_bound = lipschitz * covering_radius;
    if cfg.strict_covering && discretization_bound > cfg.eps / 3.0 {
        return Err(PssError::Config(format!(
            "training set too coarse: discretization bound {discretization_bound:.3e} exceeds eps/3"
        )));
    }

    let z0 = stiff.solve_bbar(&stiff.f);
    let mut rb = ReducedBasis {
        dims,
        params: vec![],
        selected: vec![],
        basis: vec![],
        bbar_n: vec![],
        bj_n: vec![vec![]; dims],
        f_n: vec![],
        constants,
        surrogate_max: vec![],
        covering_radius,
        discretization_bound,
        train_size: train.len(),
        solves: 0,
        r_cols: vec![],
    };
    // Orthonormal V-coordinates of the surrogate vectors.
    let mut e: Vec<Vec<f64>> = vec![];
    let push_col = |w: &[f64], e: &mut Vec<Vec<f64>>, r_cols: &mut Vec<Vec<f64>>| {
        let wc = stiff.v_coords(w);
        let mut r = wc.clone();
        let mut coef = vec![0.0; e.len()];
        for _ in 0..2 {
            for (c, q) in coef.iter_mut().zip(e.iter()) {
                let t = dot(q, &r);
                *c += t;
                axpy(-t, q, &mut r);
            }
        }
        let n = norm2(&r);
        if n > 1e-14 * norm2(&wc) {
            r.iter_mut().for_each(|x| *x /= n);
            e.push(r);
            coef.push(n);
        }
        r_cols.push(coef);
    };
    push_col(&z0, &mut e, &mut rb.r_cols);
    let threshold = cfg.eps / (3.0 * constants.beta);
    let mut pick = 0usize;
    loop {
        if !rb.is_empty() {
            let k = rb.len();
            let vals = train
                .par_iter()
                .map(|y| rb.surrogate_at(y, k))
                .collect::<Result<Vec<f64>>>()?;
            let m = vals.iter().copied().fold(0.0, f64::max);
            rb.surrogate_max.push(m);
            if m <= threshold || k >= cfg.n_max {
                break;
            }
            pick = (0..vals.len()).find(|&i| vals[i] == m).unwrap();
        } else {
            rb.surrogate_max.push(norm2(&stiff.v_coords(&z0)));
        }
        let y = &train[pick];
        let u = stiff.solve(y)?;
        rb.solves += 1;
        let mut q = u.clone();
        for _ in 0..2 {
            for b in &rb.basis {
                let c = stiff.v_inner(b, &q);
                axpy(-c, b, &mut q);
            }
        }
        let n = stiff.v_norm(&q);
        if n <= 1e-12 * stiff.v_norm(&u) {
            break;
        }
        q.iter_mut().for_each(|x| *x /= n);
        let bq = stiff.bbar.matvec(&q);
        let bjq: Vec<Vec<f64>> = stiff.bjs.iter().map(|b| b.matvec(&q)).collect();
        for (i, b) in rb.basis.iter().enumerate() {
            let s = dot(b, &bq);
            rb.bbar_n[i].push(s);
            for (j, bj) in bjq.iter().enumerate() {
                let t = dot(b, bj);
                rb.bj_n[j][i].push(t);
            }
        }
        let k = rb.basis.len();
        rb.bbar_n.push((0..k).map(|i| rb.bbar_n[i][k]).chain([dot(&q, &bq)]).collect());
        for (j, bj) in bjq.iter().enumerate() {
            let row: Vec<f64> = (0..k).map(|i| rb.bj_n[j][i][k]).chain([dot(&q, bj)]).collect();
            rb.bj_n[j].push(row);
        }
        rb.f_n.push(dot(&q, &stiff.f));
        push_col(&q, &mut e, &mut rb.r_cols);
        for bj in &bjq {
            push_col(&stiff.solve_bbar(bj), &mut e, &mut rb.r_cols);
        }
        rb.basis.push(q);
        rb.params.push(y.clone());
        rb.selected.push(pick);
    }
    Ok(rb)
}

/// Online phase: reduced coefficients and the lifted field.
pub fn rb_online(rb: &ReducedBasis, y: &[f64]) -> Result<(Vec<f64>, FieldVector)> {
    if y.iter().any(|v| !(v.abs() <= 1.0 + 1e-12)) {
        return Err(PssError::MalformedInput("parameter outside [-1,1]".into()));
    }
    let c = rb.coefficients_at(y, rb.len())?;
    let u = rb.lift(&c);
    Ok((c, u))
}

/// `dist(u, V_k)_V` for the first `k` basis vectors.
pub fn projection_distance(stiff: &StiffnessSet, rb: &ReducedBasis, u: &[f64], k: usize) -> f64 {
    let mut r = u.to_vec();
    for q in &rb.basis[..k] {
        let c = stiff.v_inner(q, &r);
        axpy(-c, q, &mut r);
    }
    stiff.v_norm(&r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeaSample {
    pub galerkin_error: f64,
    pub projection_error: f64,
    pub holds: bool,
}

/// Checks `||u_h - u_n||_V <= sqrt(R/alpha) dist(u_h, V_n)_V` at each `y`.
pub fn cea_check(stiff: &StiffnessSet, rb: &ReducedBasis, params: &[Vec<f64>]) -> Result<Vec<CeaSample>> {
    params
        .par_iter()
        .map(|y| {
            let u = stiff.solve(y)?;
            let (_, un) = rb_online(rb, y)?;
            let mut diff = u.clone();
            axpy(-1.0, &un, &mut diff);
            let galerkin_error = stiff.v_norm(&diff);
            let projection_error = projection_distance(stiff, rb, &u, rb.len());
            let scale = 1e-12 * stiff.v_norm(&u);
            Ok(CeaSample {
                galerkin_error,
                projection_error,
                holds: galerkin_error <= rb.constants.cea * projection_error + scale,
            })
        })
        .collect()
}
