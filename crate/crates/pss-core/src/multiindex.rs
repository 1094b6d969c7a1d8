//! Multi-indices, downward-closed index sets and a priori set construction.
//!
//! Positions are 1-based. A [`MultiIndex`] stores only its nonzero entries.

use crate::error::{PssError, Result};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit(j: usize) -> Self {
        assert!(j >= 1, "positions are 1-based");
        Self {
            entries: vec![(j, 1)],
        }
    }

    /// Builds from a dense exponent vector; entry `i` is position `i+1`.
    pub fn from_dense(exps: &[u32]) -> Self {
        Self {
            entries: exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| (i + 1, e))
                .collect(),
        }
    }

    /// Builds from `(position, exponent)` pairs, rejecting zero positions,
    /// zero exponents and repeated positions.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> Result<Self> {
        let mut entries = pairs.to_vec();
        entries.sort_unstable();
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(PssError::MalformedInput(format!("position {} repeated", w[0].0)));
            }
        }
        if entries.iter().any(|&(j, e)| j == 0 || e == 0) {
            return Err(PssError::MalformedInput(
                "positions are 1-based and exponents positive".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn pairs(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn get(&self, j: usize) -> u32 {
        self.entries
            .binary_search_by_key(&j, |&(p, _)| p)
            .map(|k| self.entries[k].1)
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|nu|`
    pub fn order(&self) -> u32 {
        self.entries.iter().map(|&(_, e)| e).sum()
    }

    /// Number of active positions.
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(j, _)| j)
    }

    /// Largest active position, 0 for the zero index.
    pub fn max_position(&self) -> usize {
        self.entries.last().map(|&(j, _)| j).unwrap_or(0)
    }

    pub fn to_dense(&self, len: usize) -> Vec<u32> {
        let mut v = vec![0; len];
        for &(j, e) in &self.entries {
            if j <= len {
                v[j - 1] = e;
            }
        }
        v
    }

    pub fn plus_unit(&self, j: usize) -> Self {
        assert!(j >= 1);
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&j, |&(p, _)| p) {
            Ok(k) => entries[k].1 += 1,
            Err(k) => entries.insert(k, (j, 1)),
        }
        Self { entries }
    }

    /// `nu - e_j`, or `None` when `nu_j = 0`.
    pub fn minus_unit(&self, j: usize) -> Option<Self> {
        let k = self.entries.binary_search_by_key(&j, |&(p, _)| p).ok()?;
        let mut entries = self.entries.clone();
        if entries[k].1 == 1 {
            entries.remove(k);
        } else {
            entries[k].1 -= 1;
        }
        Some(Self { entries })
    }

    /// Componentwise `self <= other`.
    pub fn leq(&self, other: &Self) -> bool {
        self.entries.iter().all(|&(j, e)| other.get(j) >= e)
    }

    /// Predecessors `nu - e_j` for `j` in the support, with their position.
    pub fn predecessors(&self) -> impl Iterator<Item = (usize, MultiIndex)> + '_ {
        self.support().map(move |j| (j, self.minus_unit(j).unwrap()))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then(self.max_position().cmp(&other.max_position()))
            .then_with(|| {
                let n = self.max_position();
                self.to_dense(n).cmp(&other.to_dense(n))
            })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|&(j, e)| if e == 1 { format!("e{j}") } else { format!("{e}e{j}") })
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<(usize, u32)>::deserialize(d)?;
        MultiIndex::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}

/// Insertion-ordered downward-closed set of multi-indices.
#[derive(Clone, Debug, Default)]
pub struct IndexSet {
    members: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    parents: Vec<Option<(usize, usize)>>,
    max_dim: usize,
}

impl PartialEq for IndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

impl IndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// `{0}`
    pub fn root() -> Self {
        let mut s = Self::new();
        s.insert(MultiIndex::zero()).unwrap();
        s
    }

    /// Builds from an ordered list whose every prefix must be downward closed.
    pub fn from_ordered(list: Vec<MultiIndex>) -> Result<Self> {
        let mut s = Self::new();
        for nu in list {
            s.insert(nu)?;
        }
        Ok(s)
    }

    /// Builds from an unordered downward-closed collection, ordering it by
    /// the total order on multi-indices.
    pub fn from_unordered(list: Vec<MultiIndex>) -> Result<Self> {
        if !is_downward_closed(&list)? {
            return Err(PssError::MalformedInput("collection is not downward closed".into()));
        }
        let mut list = list;
        list.sort();
        Self::from_ordered(list)
    }

    /// Appends `nu`; all its predecessors must already be members.
    pub fn insert(&mut self, nu: MultiIndex) -> Result<usize> {
        if self.lookup.contains_key(&nu) {
            return Err(PssError::MalformedInput(format!("{nu} inserted twice")));
        }
        let mut parent = None;
        for (j, pred) in nu.predecessors() {
            match self.lookup.get(&pred) {
                Some(&k) => parent = Some((k, j)),
                None => {
                    return Err(PssError::MalformedInput(format!(
                        "inserting {nu} breaks downward closedness ({pred} missing)"
                    )))
                }
            }
        }
        let k = self.members.len();
        self.max_dim = self.max_dim.max(nu.max_position());
        self.lookup.insert(nu.clone(), k);
        self.members.push(nu);
        self.parents.push(parent);
        Ok(k)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.lookup.contains_key(nu)
    }

    pub fn position(&self, nu: &MultiIndex) -> Option<usize> {
        self.lookup.get(nu).copied()
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.members.iter()
    }

    pub fn get(&self, k: usize) -> &MultiIndex {
        &self.members[k]
    }

    /// `j(Lambda)`, the largest active position (0 for `{0}`).
    pub fn max_active_dim(&self) -> usize {
        self.max_dim
    }

    /// Largest exponent used in any member.
    pub fn max_degree(&self) -> u32 {
        self.members
            .iter()
            .flat_map(|m| m.pairs().iter().map(|&(_, e)| e))
            .max()
            .unwrap_or(0)
    }

    /// For member `k != 0`: `(index of nu - e_j, j)` with `j` the largest active position.
    pub fn parent(&self, k: usize) -> Option<(usize, usize)> {
        self.parents[k]
    }

    /// `e_j in Lambda and l <= j  =>  e_l in Lambda`.
    pub fn is_anchored(&self) -> bool {
        (1..=self.max_dim).all(|j| self.contains(&MultiIndex::unit(j)))
    }

    /// Inserts every member of `extra` (in the given order).
    pub fn extend(&mut self, extra: impl IntoIterator<Item = MultiIndex>) -> Result<()> {
        for nu in extra {
            self.insert(nu)?;
        }
        Ok(())
    }
}

impl Serialize for IndexSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.members.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let list = Vec::<MultiIndex>::deserialize(d)?;
        IndexSet::from_ordered(list).map_err(serde::de::Error::custom)
    }
}

pub fn is_downward_closed(set: &[MultiIndex]) -> Result<bool> {
    let mut seen = HashSet::with_capacity(set.len());
    for nu in set {
        if !seen.insert(nu) {
            return Err(PssError::MalformedInput(format!("duplicate entry {nu}")));
        }
    }
    Ok(set
        .iter()
        .all(|nu| nu.predecessors().all(|(_, p)| seen.contains(&p))))
}

fn check_cap(set: &IndexSet, d_max: usize) -> Result<()> {
    if d_max < set.max_active_dim() {
        return Err(PssError::InvalidCap {
            cap: d_max,
            active: set.max_active_dim(),
        });
    }
    Ok(())
}

fn forward_candidates(set: &IndexSet, d_max: usize) -> BTreeSet<MultiIndex> {
    let mut out = BTreeSet::new();
    for nu in set.iter() {
        for j in 1..=d_max {
            let c = nu.plus_unit(j);
            if !set.contains(&c) {
                out.insert(c);
            }
        }
    }
    out
}

/// `N(Lambda)` restricted to positions `<= d_max`, sorted by the total order.
pub fn neighbors(set: &IndexSet, d_max: usize) -> Result<Vec<MultiIndex>> {
    check_cap(set, d_max)?;
    if set.is_empty() {
        return Ok(vec![MultiIndex::zero()]);
    }
    Ok(forward_candidates(set, d_max)
        .into_iter()
        .filter(|c| c.predecessors().all(|(_, p)| set.contains(&p)))
        .collect())
}

/// Neighbors with active positions `<= j(Lambda) + 1`.
pub fn anchored_neighbors(set: &IndexSet) -> Vec<MultiIndex> {
    neighbors(set, set.max_active_dim() + 1).expect("cap is never below j(Lambda)")
}

/// `M(Lambda)` restricted to positions `<= d_max`, sorted by the total order.
pub fn margin(set: &IndexSet, d_max: usize) -> Result<Vec<MultiIndex>> {
    check_cap(set, d_max)?;
    Ok(forward_candidates(set, d_max).into_iter().collect())
}

/// `{nu : sum_j lambda_j nu_j <= k}` on the given dimensions.
pub fn simplex_set(lambda: &[f64], k: f64) -> IndexSet {
    assert!(lambda.iter().all(|&l| l > 0.0));
    let mut out = Vec::new();
    let mut cur = vec![0u32; lambda.len()];
    fn rec(d: usize, budget: f64, lambda: &[f64], cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if d == lambda.len() {
            out.push(MultiIndex::from_dense(cur));
            return;
        }
        let mut e = 0u32;
        loop {
            let used = lambda[d] * e as f64;
            if used > budget + 1e-12 {
                break;
            }
            cur[d] = e;
            rec(d + 1, budget - used, lambda, cur, out);
            e += 1;
        }
        cur[d] = 0;
    }
    rec(0, k, lambda, &mut cur, &mut out);
    out.sort();
    IndexSet::from_ordered(out).expect("simplex sets are downward closed")
}

/// Total-degree set `{|nu| <= k}` on `dims` dimensions.
pub fn total_degree_set(dims: usize, k: u32) -> IndexSet {
    simplex_set(&vec![1.0; dims], k as f64)
}

/// Box `{nu_j <= deg, j <= dims}`.
pub fn box_set(dims: usize, deg: u32) -> IndexSet {
    let mut out = Vec::new();
    let total = (deg as usize + 1).pow(dims as u32);
    for mut idx in 0..total {
        let dense: Vec<u32> = (0..dims)
            .map(|_| {
                let e = (idx % (deg as usize + 1)) as u32;
                idx /= deg as usize + 1;
                e
            })
            .collect();
        out.push(MultiIndex::from_dense(&dense));
    }
    out.sort();
    IndexSet::from_ordered(out).expect("boxes are downward closed")
}

/// Random downward-closed set grown from `{0}` by uniformly chosen neighbors.
pub fn random_downward_closed<R: Rng>(rng: &mut R, dims: usize, card: usize) -> IndexSet {
    let mut set = IndexSet::root();
    while set.len() < card {
        let nb = neighbors(&set, dims.max(set.max_active_dim())).unwrap();
        let k = rng.gen_range(0..nb.len());
        set.insert(nb[k].clone()).unwrap();
    }
    set
}

/// Same as [`random_downward_closed`] with every exponent kept `<= max_deg`.
pub fn random_downward_closed_in_box<R: Rng>(
    rng: &mut R,
    dims: usize,
    card: usize,
    max_deg: u32,
) -> IndexSet {
    let mut set = IndexSet::root();
    while set.len() < card {
        let nb: Vec<_> = neighbors(&set, dims)
            .unwrap()
            .into_iter()
            .filter(|m| m.pairs().iter().all(|&(_, e)| e <= max_deg))
            .collect();
        if nb.is_empty() {
            break;
        }
        let k = rng.gen_range(0..nb.len());
        set.insert(nb[k].clone()).unwrap();
    }
    set
}

/// Coefficient surrogate `s_nu` used to rank indices.
pub trait Surrogate {
    fn value(&self, nu: &MultiIndex) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurrogateKind {
    /// `rho^{-nu}`; positions beyond `rho` get value 0.
    ProductOfRadii { rho: Vec<f64> },
    /// `inf rho^{-nu}` over `rho_j >= 1` with `sum_j (rho_j - 1) b_j <= budget`.
    OptimizedRadii { b: Vec<f64>, budget: f64 },
    /// Monotone Legendre surrogate, see [`crate::legendre::MonotoneLegendre`].
    LegendreProduct(crate::legendre::MonotoneLegendre),
    /// `2^{-sum lambda_j nu_j}`; positions beyond `lambda` get value 0.
    Simplex { lambda: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateWeights {
    #[serde(flatten)]
    pub kind: SurrogateKind,
    /// Extra factor `prod_{j in supp} (1 + nu_j)^{-b}`.
    #[serde(default)]
    pub algebraic: Option<f64>,
}

impl SurrogateWeights {
    pub fn new(kind: SurrogateKind) -> Self {
        Self {
            kind,
            algebraic: None,
        }
    }

    pub fn product_of_radii(rho: Vec<f64>) -> Self {
        Self::new(SurrogateKind::ProductOfRadii { rho })
    }
}

/// Water-filling solution of `max sum nu_j log rho_j` under the budget.
pub fn optimized_radii(nu: &MultiIndex, b: &[f64], budget: f64) -> Option<Vec<(usize, f64)>> {
    if nu.max_position() > b.len() {
        return None;
    }
    let act: Vec<(usize, f64, f64)> = nu
        .pairs()
        .iter()
        .map(|&(j, e)| (j, e as f64, b[j - 1]))
        .collect();
    if act.is_empty() {
        return Some(Vec::new());
    }
    // rho_j = max(1, nu_j / (lam b_j)); spent(lam) is decreasing in lam.
    let spent = |lam: f64| -> f64 {
        act.iter()
            .map(|&(_, e, bj)| (e / (lam * bj) - 1.0).max(0.0) * bj)
            .sum()
    };
    let mut hi = act.iter().map(|&(_, e, bj)| e / bj).fold(0.0, f64::max);
    let mut lo = hi;
    while spent(lo) < budget {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spent(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(
        act.iter()
            .map(|&(j, e, bj)| (j, (e / (hi * bj)).max(1.0)))
            .collect(),
    )
}

impl Surrogate for SurrogateWeights {
    fn value(&self, nu: &MultiIndex) -> f64 {
        let base = match &self.kind {
            SurrogateKind::ProductOfRadii { rho } => {
                if nu.max_position() > rho.len() {
                    0.0
                } else {
                    nu.pairs()
                        .iter()
                        .map(|&(j, e)| rho[j - 1].powi(-(e as i32)))
                        .product()
                }
            }
            SurrogateKind::OptimizedRadii { b, budget } => match optimized_radii(nu, b, *budget) {
                None => 0.0,
                Some(r) => r
                    .iter()
                    .map(|&(j, rj)| rj.powi(-(nu.get(j) as i32)))
                    .product(),
            },
            SurrogateKind::LegendreProduct(m) => m.value(nu),
            SurrogateKind::Simplex { lambda } => {
                if nu.max_position() > lambda.len() {
                    0.0
                } else {
                    let s: f64 = nu.pairs().iter().map(|&(j, e)| lambda[j - 1] * e as f64).sum();
                    (-s * std::f64::consts::LN_2).exp()
                }
            }
        };
        match self.algebraic {
            Some(b) => {
                base * nu
                    .pairs()
                    .iter()
                    .map(|&(_, e)| (1.0 + e as f64).powf(-b))
                    .product::<f64>()
            }
            None => base,
        }
    }
}

/// Result of [`build_apriori_set`].
#[derive(Clone, Debug)]
pub struct AprioriSet {
    pub set: IndexSet,
    pub values: Vec<f64>,
    pub evaluations: usize,
}

/// Greedy anchored expansion picking the largest surrogate value at each step.
pub fn build_apriori_set<S: Surrogate + ?Sized>(s: &S, n: usize) -> Result<AprioriSet> {
    if n == 0 {
        return Err(PssError::MalformedInput("n must be at least 1".into()));
    }
    const SLACK: f64 = 1e-12;
    let mut set = IndexSet::root();
    let mut values = vec![s.value(&MultiIndex::zero())];
    let mut evaluations = 1usize;
    let mut frontier: BTreeSet<MultiIndex> = BTreeSet::new();
    let mut cache: HashMap<MultiIndex, f64> = HashMap::new();

    let add_candidates = |set: &IndexSet,
                              values: &[f64],
                              frontier: &mut BTreeSet<MultiIndex>,
                              cache: &mut HashMap<MultiIndex, f64>,
                              cands: Vec<MultiIndex>|
     -> Result<usize> {
        let mut count = 0;
        for c in cands {
            if set.contains(&c) || frontier.contains(&c) {
                continue;
            }
            if !c.predecessors().all(|(_, p)| set.contains(&p)) {
                continue;
            }
            let v = s.value(&c);
            count += 1;
            for (_, p) in c.predecessors() {
                let vp = values[set.position(&p).unwrap()];
                if v > vp * (1.0 + SLACK) {
                    return Err(PssError::SurrogateViolation(format!(
                        "s({c}) = {v:e} exceeds s({p}) = {vp:e}"
                    )));
                }
            }
            cache.insert(c.clone(), v);
            frontier.insert(c);
        }
        Ok(count)
    };

    if n > 1 {
        evaluations +=
            add_candidates(&set, &values, &mut frontier, &mut cache, vec![MultiIndex::unit(1)])?;
    }
    while set.len() < n {
        let best = frontier
            .iter()
            .fold(None::<(&MultiIndex, f64)>, |acc, m| {
                let v = cache[m];
                match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((m, v)),
                }
            })
            .map(|(m, _)| m.clone())
            .expect("anchored frontier is never empty");
        frontier.remove(&best);
        let v = cache.remove(&best).unwrap();
        let old_dim = set.max_active_dim();
        set.insert(best.clone())?;
        values.push(v);
        let new_dim = set.max_active_dim();
        let mut cands: Vec<MultiIndex> = (1..=new_dim + 1).map(|j| best.plus_unit(j)).collect();
        if new_dim > old_dim {
            cands.push(MultiIndex::unit(new_dim + 1));
        }
        if set.len() < n {
            evaluations += add_candidates(&set, &values, &mut frontier, &mut cache, cands)?;
        }
        if new_dim > old_dim && new_dim >= 2 {
            let a = values[set.position(&MultiIndex::unit(new_dim - 1)).unwrap()];
            if v > a * (1.0 + SLACK) {
                return Err(PssError::SurrogateViolation(format!(
                    "s(e{new_dim}) exceeds s(e{})",
                    new_dim - 1
                )));
            }
        }
    }
    let bound = (n * n) as f64 / 2.0 + n as f64;
    debug_assert!(evaluations as f64 <= bound, "{evaluations} evaluations exceed {bound}");
    Ok(AprioriSet {
        set,
        values,
        evaluations,
    })
}

/// Orders the box `{nu_j <= deg_max, j <= d_max}` by decreasing monotone
/// majorant `sup_{mu >= nu} |c_mu|` (taken inside the box). Missing values
/// count as 0. Ties go to the smaller index, so every prefix is downward
/// closed.
pub fn monotone_majorant_order(
    values: &HashMap<MultiIndex, f64>,
    d_max: usize,
    deg_max: u32,
) -> Vec<(MultiIndex, f64)> {
    let bx = box_set(d_max, deg_max);
    let n = bx.len();
    let mut maj = vec![0.0f64; n];
    for k in (0..n).rev() {
        let nu = bx.get(k);
        let mut m = values.get(nu).copied().unwrap_or(0.0).abs();
        for j in 1..=d_max {
            if nu.get(j) < deg_max {
                let up = bx.position(&nu.plus_unit(j)).unwrap();
                m = m.max(maj[up]);
            }
        }
        maj[k] = m;
    }
    let mut order: Vec<(MultiIndex, f64)> = bx.members().iter().cloned().zip(maj).collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mi(d: &[u32]) -> MultiIndex {
        MultiIndex::from_dense(d)
    }

    fn e(j: usize) -> MultiIndex {
        MultiIndex::unit(j)
    }

    fn set_of(list: &[&[u32]]) -> IndexSet {
        IndexSet::from_unordered(list.iter().map(|d| mi(d)).collect()).unwrap()
    }

    fn sorted(mut v: Vec<MultiIndex>) -> Vec<MultiIndex> {
        v.sort();
        v
    }

    #[test]
    fn order_compares_degree_then_position_then_lex() {
        assert!(e(2) < mi(&[2]));
        assert!(mi(&[2]) < mi(&[1, 1]));
        assert!(mi(&[0, 2]) < mi(&[1, 1]));
        assert!(MultiIndex::zero() < e(1));
        assert!(e(1) < e(2));
    }

    #[test]
    fn downward_closed_examples() {
        assert!(is_downward_closed(&[]).unwrap());
        assert!(is_downward_closed(&[mi(&[]), e(1), mi(&[2]), e(2)]).unwrap());
        assert!(!is_downward_closed(&[e(1)]).unwrap());
        assert!(matches!(
            is_downward_closed(&[mi(&[]), mi(&[])]),
            Err(PssError::MalformedInput(_))
        ));
    }

    #[test]
    fn neighbor_examples() {
        assert_eq!(neighbors(&IndexSet::root(), 3).unwrap(), vec![e(1), e(2), e(3)]);
        assert_eq!(
            neighbors(&set_of(&[&[0], &[1]]), 2).unwrap(),
            sorted(vec![mi(&[2]), e(2)])
        );
        assert_eq!(
            neighbors(&set_of(&[&[0], &[1], &[0, 1]]), 2).unwrap(),
            sorted(vec![mi(&[2]), mi(&[0, 2]), mi(&[1, 1])])
        );
        assert!(matches!(
            neighbors(&set_of(&[&[0], &[0, 0, 1]]), 2),
            Err(PssError::InvalidCap { cap: 2, active: 3 })
        ));
    }

    #[test]
    fn anchored_neighbor_examples() {
        assert_eq!(anchored_neighbors(&IndexSet::root()), vec![e(1)]);
        assert_eq!(anchored_neighbors(&set_of(&[&[0], &[1]])), sorted(vec![mi(&[2]), e(2)]));
        assert_eq!(
            anchored_neighbors(&set_of(&[&[0], &[1], &[2]])),
            sorted(vec![mi(&[3]), e(2)])
        );
    }

    #[test]
    fn margin_examples() {
        assert_eq!(margin(&IndexSet::root(), 2).unwrap(), vec![e(1), e(2)]);
        assert_eq!(
            margin(&set_of(&[&[0], &[1]]), 2).unwrap(),
            sorted(vec![mi(&[2]), e(2), mi(&[1, 1])])
        );
    }

    #[test]
    fn apriori_examples() {
        let s = SurrogateWeights::product_of_radii(vec![2.0, 4.0, 8.0, 16.0]);
        let a = build_apriori_set(&s, 4).unwrap();
        assert_eq!(sorted(a.set.members().to_vec()), sorted(vec![mi(&[]), e(1), mi(&[2]), e(2)]));
        assert_eq!(a.set.get(2), &e(2));
        let a1 = build_apriori_set(&s, 1).unwrap();
        assert_eq!(a1.set.members(), &[MultiIndex::zero()]);
        let s2 = SurrogateWeights::product_of_radii(vec![2.0, 2.0]);
        let a2 = build_apriori_set(&s2, 3).unwrap();
        assert_eq!(a2.set.members(), &[mi(&[]), e(1), e(2)]);
    }

    #[test]
    fn apriori_detects_non_monotone() {
        let s = SurrogateWeights::product_of_radii(vec![0.5, 2.0]);
        assert!(matches!(build_apriori_set(&s, 5), Err(PssError::SurrogateViolation(_))));
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(
            simplex_set(&[1.0, 1.0], 1.0).members(),
            &[mi(&[]), e(1), e(2)]
        );
        assert_eq!(
            sorted(simplex_set(&[1.0, 2.0], 2.0).members().to_vec()),
            sorted(vec![mi(&[]), e(1), mi(&[2]), e(2)])
        );
        assert_eq!(simplex_set(&[1.0], 3.0).len(), 4);
    }

    #[test]
    fn majorant_examples() {
        let bx = box_set(2, 3);
        let rho = [2.0, 3.0];
        let vals: HashMap<_, _> = bx
            .iter()
            .map(|m| (m.clone(), SurrogateWeights::product_of_radii(rho.to_vec()).value(m)))
            .collect();
        for (m, v) in monotone_majorant_order(&vals, 2, 3) {
            assert_eq!(v, vals[&m]);
        }
        let mut vals = HashMap::new();
        vals.insert(MultiIndex::zero(), 1.0);
        vals.insert(e(1), 0.1);
        vals.insert(mi(&[2]), 0.5);
        let ord = monotone_majorant_order(&vals, 1, 3);
        let get = |m: &MultiIndex| ord.iter().find(|(x, _)| x == m).unwrap().1;
        assert_eq!(get(&e(1)), 0.5);
    }

    #[test]
    fn majorant_on_random_box_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bx = box_set(2, 2);
        let vals: HashMap<_, _> = bx.iter().map(|m| (m.clone(), rng.gen::<f64>())).collect();
        let ord = monotone_majorant_order(&vals, 2, 2);
        for (m, v) in &ord {
            let brute = bx
                .iter()
                .filter(|u| m.leq(u))
                .map(|u| vals[u])
                .fold(0.0, f64::max);
            assert_eq!(*v, brute);
            assert!(*v >= vals[m]);
        }
        let mut prefix = Vec::new();
        for (m, _) in ord {
            prefix.push(m);
            assert!(is_downward_closed(&prefix).unwrap());
        }
    }

    #[test]
    fn json_round_trip() {
        let s = set_of(&[&[0], &[1], &[0, 2], &[0, 1], &[2]]);
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(js, "[[],[[1,1]],[[2,1]],[[1,2]],[[2,2]]]");
        let back: IndexSet = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<IndexSet>("[[[1,1]]]").is_err());
    }

    #[test]
    fn optimized_radii_meet_budget() {
        let b = [0.4, 0.2, 0.05];
        let nu = mi(&[2, 1, 3]);
        let r = optimized_radii(&nu, &b, 0.3).unwrap();
        let spent: f64 = r.iter().map(|&(j, rj)| (rj - 1.0) * b[j - 1]).sum();
        assert!((spent - 0.3).abs() < 1e-9);
        assert!(r.iter().all(|&(_, rj)| rj >= 1.0));
    }

    fn arb_set() -> impl Strategy<Value = IndexSet> {
        (any::<u64>(), 1usize..5, 1usize..25).prop_map(|(seed, d, n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_downward_closed(&mut rng, d, n)
        })
    }

    proptest! {
        #[test]
        fn prefixes_stay_downward_closed(s in arb_set()) {
            for k in 1..=s.len() {
                prop_assert!(is_downward_closed(&s.members()[..k]).unwrap());
            }
        }

        #[test]
        fn frontier_inclusions(s in arb_set()) {
            let cap = s.max_active_dim() + 1;
            let a: HashSet<_> = anchored_neighbors(&s).into_iter().collect();
            let n: HashSet<_> = neighbors(&s, cap).unwrap().into_iter().collect();
            let m: HashSet<_> = margin(&s, cap).unwrap().into_iter().collect();
            prop_assert!(a.is_subset(&n));
            prop_assert!(n.is_subset(&m));
        }

        #[test]
        fn apriori_is_scale_invariant(
            rho in proptest::collection::vec(1.1f64..6.0, 1..5),
            scale in 0.01f64..100.0,
            n in 1usize..40,
        ) {
            let mut rho = rho;
            rho.sort_by(|a, b| a.partial_cmp(b).unwrap());
            struct Scaled(SurrogateWeights, f64);
            impl Surrogate for Scaled {
                fn value(&self, nu: &MultiIndex) -> f64 { self.1 * self.0.value(nu) }
            }
            let s = SurrogateWeights::product_of_radii(rho);
            let a = build_apriori_set(&s, n).unwrap();
            let b = build_apriori_set(&Scaled(s, scale), n).unwrap();
            prop_assert_eq!(&a.set, &b.set);
            prop_assert!(a.set.is_anchored());
            prop_assert!(a.evaluations as f64 <= (n * n) as f64 / 2.0 + n as f64);
        }

        #[test]
        fn simplex_cardinality_bound(
            lambda in proptest::collection::vec(0.3f64..3.0, 1..4),
            k in 0.0f64..8.0,
        ) {
            let s = simplex_set(&lambda, k);
            let d = lambda.len();
            let sum: f64 = lambda.iter().sum();
            let fact: f64 = (1..=d).map(|i| i as f64).product();
            let bound = lambda.iter().map(|l| (k + sum) / l).product::<f64>() / fact;
            prop_assert!(s.len() as f64 <= bound + 1e-9);
        }

        #[test]
        fn surrogates_are_monotone(
            rho in proptest::collection::vec(1.0f64..5.0, 1..4),
            b in 0.0f64..2.0,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rho.len();
            let s = SurrogateWeights { kind: SurrogateKind::ProductOfRadii { rho: rho.clone() }, algebraic: Some(b) };
            let o = SurrogateWeights::new(SurrogateKind::OptimizedRadii { b: rho.iter().map(|r| 1.0 / r).collect(), budget: 0.5 });
            let set = random_downward_closed(&mut rng, d, 15);
            for nu in set.iter() {
                for j in 1..=d {
                    let up = nu.plus_unit(j);
                    prop_assert!(s.value(&up) <= s.value(nu) * (1.0 + 1e-12));
                    prop_assert!(o.value(&up) <= o.value(nu) * (1.0 + 1e-9));
                }
            }
        }
    }
}
