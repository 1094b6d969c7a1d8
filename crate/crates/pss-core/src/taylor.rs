//! Taylor coefficients of `y -> u_h(y)` at `y = 0`.
//!
//! `Bbar t_0 = F` and `Bbar t_nu = -sum_{j in supp nu} B_j t_{nu - e_j}`, so
//! every coefficient costs one back-substitution with the factorized `Bbar`.

use crate::error::{PssError, Result};
use crate::linalg::axpy;
use crate::model::{FieldVector, StiffnessSet};
use crate::multiindex::{margin, IndexSet, MultiIndex};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};

/// Lazily grown table of Taylor coefficients.
#[derive(Clone, Debug, Default)]
pub struct TaylorTable {
    index: HashMap<MultiIndex, usize>,
    keys: Vec<MultiIndex>,
    coeffs: Vec<FieldVector>,
    solves: usize,
}

fn coefficient(
    stiff: &StiffnessSet,
    nu: &MultiIndex,
    lookup: impl Fn(&MultiIndex) -> Option<usize>,
    coeffs: &[FieldVector],
) -> Result<FieldVector> {
    if nu.is_zero() {
        return Ok(stiff.solve_bbar(&stiff.f));
    }
    let mut rhs = vec![0.0; stiff.n_h()];
    for (j, pred) in nu.predecessors() {
        let k = lookup(&pred).ok_or_else(|| PssError::Ordering(format!("{pred} (needed by {nu})")))?;
        stiff.bjs[j - 1].axpy_matvec(-1.0, &coeffs[k], &mut rhs);
    }
    Ok(stiff.solve_bbar(&rhs))
}

impl TaylorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Number of back-substitutions performed so far.
    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<&FieldVector> {
        self.index.get(nu).map(|&k| &self.coeffs[k])
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.index.contains_key(nu)
    }

    /// Computes every requested coefficient that is missing. With
    /// `closure = false`, a predecessor that is neither stored nor requested
    /// is an ordering error; otherwise it is computed as well.
    pub fn ensure(&mut self, stiff: &StiffnessSet, wanted: &[MultiIndex], closure: bool) -> Result<()> {
        for nu in wanted {
            if nu.max_position() > stiff.dims() {
                return Err(PssError::MalformedInput(format!(
                    "{nu} uses a position beyond the model's {} dimensions",
                    stiff.dims()
                )));
            }
        }
        let mut todo: BTreeMap<u32, Vec<MultiIndex>> = BTreeMap::new();
        let mut queued: std::collections::HashSet<MultiIndex> = Default::default();
        let mut stack: Vec<MultiIndex> = wanted.iter().filter(|n| !self.contains(n)).cloned().collect();
        while let Some(nu) = stack.pop() {
            if self.contains(&nu) || !queued.insert(nu.clone()) {
                continue;
            }
            if closure {
                for (_, p) in nu.predecessors() {
                    if !self.contains(&p) && !queued.contains(&p) {
                        stack.push(p);
                    }
                }
            }
            todo.entry(nu.order()).or_default().push(nu);
        }
        for (_, mut layer) in todo {
            layer.sort();
            let index = &self.index;
            let coeffs = &self.coeffs;
            let results: Vec<Result<FieldVector>> = layer
                .par_iter()
                .map(|nu| coefficient(stiff, nu, |m| index.get(m).copied(), coeffs))
                .collect();
            for (nu, t) in layer.into_iter().zip(results) {
                let t = t?;
                self.index.insert(nu.clone(), self.keys.len());
                self.keys.push(nu);
                self.coeffs.push(t);
                self.solves += 1;
            }
        }
        Ok(())
    }

    /// Extracts a surrogate on `set`; all coefficients must be present.
    pub fn surrogate(&self, stiff: &StiffnessSet, set: &IndexSet) -> Result<TaylorSurrogate> {
        let coeffs = set
            .iter()
            .map(|nu| {
                self.get(nu)
                    .cloned()
                    .ok_or_else(|| PssError::Ordering(format!("{nu} not computed")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TaylorSurrogate::from_parts(stiff, set.clone(), coeffs, self.solves))
    }
}

/// Truncated Taylor expansion `sum_{nu in Lambda} t_nu y^nu`.
#[derive(Clone, Debug)]
pub struct TaylorSurrogate {
    pub set: IndexSet,
    pub coeffs: Vec<FieldVector>,
    pub v_norms: Vec<f64>,
    /// `d_nu = ||t_nu||_abar^2`
    pub d: Vec<f64>,
    pub solves: usize,
}

impl TaylorSurrogate {
    fn from_parts(stiff: &StiffnessSet, set: IndexSet, coeffs: Vec<FieldVector>, solves: usize) -> Self {
        let v_norms = coeffs.iter().map(|t| stiff.v_norm(t)).collect();
        let d = coeffs.iter().map(|t| stiff.abar_norm(t).powi(2)).collect();
        Self {
            set,
            coeffs,
            v_norms,
            d,
            solves,
        }
    }

    pub fn coeff(&self, nu: &MultiIndex) -> Option<&FieldVector> {
        self.set.position(nu).map(|k| &self.coeffs[k])
    }

    /// Restriction to the first `n` members, which must form a downward-closed set.
    pub fn prefix(&self, n: usize) -> Result<TaylorSurrogate> {
        let n = n.min(self.set.len());
        Ok(Self {
            set: IndexSet::from_ordered(self.set.members()[..n].to_vec())?,
            coeffs: self.coeffs[..n].to_vec(),
            v_norms: self.v_norms[..n].to_vec(),
            d: self.d[..n].to_vec(),
            solves: n,
        })
    }

    /// Monomials `y^nu` for all members, one multiplication each.
    pub fn monomials(&self, y: &[f64]) -> Vec<f64> {
        monomials(&self.set, y)
    }

    pub fn evaluate(&self, y: &[f64]) -> FieldVector {
        let m = self.monomials(y);
        let mut u = vec![0.0; self.coeffs.first().map_or(0, |c| c.len())];
        for (c, t) in m.iter().zip(&self.coeffs) {
            if *c != 0.0 {
                axpy(*c, t, &mut u);
            }
        }
        u
    }
}

pub(crate) fn monomials(set: &IndexSet, y: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; set.len()];
    for k in 0..set.len() {
        m[k] = match set.parent(k) {
            None => 1.0,
            Some((p, j)) => m[p] * y.get(j - 1).copied().unwrap_or(0.0),
        };
    }
    m
}

/// Coefficients on a downward-closed set, computed in insertion order.
pub fn compute_taylor(stiff: &StiffnessSet, set: &IndexSet) -> Result<TaylorSurrogate> {
    if set.max_active_dim() > stiff.dims() {
        return Err(PssError::MalformedInput(format!(
            "index set uses position {} but the model has {} dimensions",
            set.max_active_dim(),
            stiff.dims()
        )));
    }
    let mut table = TaylorTable::new();
    table.ensure(stiff, set.members(), false)?;
    table.surrogate(stiff, set)
}

/// `(d_nu, [d_{nu,j}])` with `d_{nu,j} = t^T |B_j| t`.
pub fn quantities_d(stiff: &StiffnessSet, t: &[f64]) -> (f64, Vec<f64>) {
    (
        stiff.bbar.quad_form(t),
        stiff.abs_bjs.iter().map(|b| b.quad_form(t)).collect(),
    )
}

/// Constants of the saturation argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaturationConstants {
    pub r: f64,
    pub abar_max: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Constant for the `abar`-energies.
    pub delta_abar: f64,
    /// Constant for the V-energies.
    pub delta: f64,
}

impl SaturationConstants {
    pub fn new(stiff: &StiffnessSet) -> Self {
        let r = stiff.r;
        let abar_max = stiff.abar_max();
        let gamma = 1.0 - r / abar_max;
        let alpha = abar_max / (r + abar_max);
        let delta_abar = 1.0 + alpha * gamma / (1.0 - alpha * gamma);
        Self {
            r,
            abar_max,
            gamma,
            alpha,
            delta_abar,
            delta: abar_max / r * delta_abar,
        }
    }
}

/// Result of the finite-margin selection.
#[derive(Clone, Debug)]
pub struct SparseMargin {
    pub indices: Vec<MultiIndex>,
    /// Number of leading dimensions kept.
    pub j_keep: usize,
    pub tail_threshold: f64,
}

/// Finite part of the margin carrying all but `eps` of its V-energy.
///
/// `abar_energy` is `sum_{nu in Lambda} d_nu`.
pub fn sparse_margin(
    stiff: &StiffnessSet,
    set: &IndexSet,
    abar_energy: f64,
    eps: f64,
) -> Result<SparseMargin> {
    let c = SaturationConstants::new(stiff);
    let threshold = c.r * eps * (1.0 - c.alpha * c.gamma) / (c.alpha * abar_energy);
    let dims = stiff.dims();
    let j_keep = (0..=dims)
        .find(|&j| stiff.family.relative_tail(j) <= threshold)
        .ok_or_else(|| {
            PssError::TruncationInsufficient(format!(
                "tail {:e} beyond {dims} dimensions exceeds {threshold:e}",
                stiff.family.relative_tail(dims)
            ))
        })?;
    let full = margin(set, dims.max(set.max_active_dim()))?;
    let indices = full
        .into_iter()
        .filter(|nu| {
            nu.predecessors()
                .all(|(j, p)| j <= j_keep || !set.contains(&p))
        })
        .collect();
    Ok(SparseMargin {
        indices,
        j_keep,
        tail_threshold: threshold,
    })
}

/// One step of the bulk chasing run.
#[derive(Clone, Debug, PartialEq)]
pub struct BulkStep {
    pub card: usize,
    pub margin_card: usize,
    pub j_keep: usize,
    /// `e(M~)` in the V-norm.
    pub margin_energy: f64,
    /// `sigma_hat(Lambda)` against the reference superset, when provided.
    pub sigma_hat: Option<f64>,
    pub solves: usize,
}

#[derive(Clone, Debug)]
pub struct BulkRun {
    /// Final set; the k-th iterate is the prefix of length `steps[k].card`.
    pub set: IndexSet,
    pub steps: Vec<BulkStep>,
    pub constants: SaturationConstants,
    pub kappa: f64,
    pub table: TaylorTable,
}

impl BulkRun {
    pub fn iterate(&self, k: usize) -> IndexSet {
        IndexSet::from_ordered(self.set.members()[..self.steps[k].card].to_vec()).unwrap()
    }

    /// Steps violating `sigma(L^k) <= kappa sigma(L^{k-1}) + theta eps`.
    pub fn reduction_violations(&self, theta: f64, eps: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for k in 1..self.steps.len() {
            if let (Some(prev), Some(cur)) = (self.steps[k - 1].sigma_hat, self.steps[k].sigma_hat) {
                if cur > self.kappa * prev + theta * eps {
                    out.push(k);
                }
            }
        }
        out
    }
}

/// Squared V-norms of the Taylor coefficients on a reference superset.
#[derive(Clone, Debug)]
pub struct ReferenceEnergies {
    pub superset: IndexSet,
    pub energy: Vec<f64>,
}

impl ReferenceEnergies {
    pub fn compute(stiff: &StiffnessSet, superset: &IndexSet) -> Result<Self> {
        let s = compute_taylor(stiff, superset)?;
        Ok(Self {
            superset: superset.clone(),
            energy: s.v_norms.iter().map(|v| v * v).collect(),
        })
    }

    /// `sum_{nu in ref \ Lambda} ||t_nu||_V^2`
    pub fn sigma_hat(&self, set: &IndexSet) -> Result<f64> {
        if let Some(nu) = set.iter().find(|nu| !self.superset.contains(nu)) {
            return Err(PssError::Config(format!("{nu} lies outside the reference superset")));
        }
        Ok(self
            .superset
            .iter()
            .zip(&self.energy)
            .filter(|(nu, _)| !set.contains(nu))
            .map(|(_, e)| e)
            .sum())
    }
}

/// Bulk chasing with finite margins.
pub fn bulk_chase_run(
    stiff: &StiffnessSet,
    theta: f64,
    eps: f64,
    reference: Option<&ReferenceEnergies>,
    max_steps: usize,
) -> Result<BulkRun> {
    if !(theta > 0.0 && theta < 1.0) || !(eps > 0.0) {
        return Err(PssError::Config(format!("need 0 < theta < 1 and eps > 0, got {theta}, {eps}")));
    }
    let constants = SaturationConstants::new(stiff);
    let kappa = 1.0 - theta / constants.delta;
    let mut set = IndexSet::root();
    let mut table = TaylorTable::new();
    table.ensure(stiff, set.members(), false)?;
    let mut abar_energy = stiff.bbar.quad_form(table.get(&MultiIndex::zero()).unwrap());
    let mut steps = Vec::new();
    loop {
        let sm = sparse_margin(stiff, &set, abar_energy, eps)?;
        table.ensure(stiff, &sm.indices, true)?;
        let norms: Vec<f64> = sm
            .indices
            .iter()
            .map(|nu| stiff.v_norm(table.get(nu).unwrap()))
            .collect();
        let margin_energy: f64 = norms.iter().map(|v| v * v).sum();
        let sigma_hat = reference.map(|r| r.sigma_hat(&set)).transpose()?;
        steps.push(BulkStep {
            card: set.len(),
            margin_card: sm.indices.len(),
            j_keep: sm.j_keep,
            margin_energy,
            sigma_hat,
            solves: table.solves(),
        });
        if margin_energy <= 2.0 * theta * eps || steps.len() > max_steps {
            break;
        }
        let m: Vec<f64> = sm
            .indices
            .iter()
            .map(|nu| {
                sm.indices
                    .iter()
                    .zip(&norms)
                    .filter(|(mu, _)| nu.leq(mu))
                    .map(|(_, &v)| v)
                    .fold(0.0, f64::max)
            })
            .collect();
        let mut order: Vec<usize> = (0..sm.indices.len()).collect();
        order.sort_by(|&a, &b| {
            m[b].partial_cmp(&m[a])
                .unwrap()
                .then_with(|| sm.indices[a].cmp(&sm.indices[b]))
        });
        let mut acc = 0.0;
        for k in order {
            let nu = sm.indices[k].clone();
            acc += norms[k] * norms[k];
            abar_energy += stiff.bbar.quad_form(table.get(&nu).unwrap());
            set.insert(nu)?;
            if acc >= theta * margin_energy {
                break;
            }
        }
    }
    Ok(BulkRun {
        set,
        steps,
        constants,
        kappa,
        table,
    })
}
