//! One runner per subcommand; each returns the tables and files to write.

use crate::config::*;
use crate::output::{gnuplot, num, opt, Table, ERROR_COLUMNS};
use pss_core::greedy::*;
use pss_core::interp::*;
use pss_core::legendre::{legendre_bound, legendre_coeffs_quadrature};
use pss_core::linalg::axpy;
use pss_core::model::{FieldVector, StiffnessSet};
use pss_core::multiindex::*;
use pss_core::rate::{fit_rate, RateFit};
use pss_core::sampling;
use pss_core::taylor::*;
use pss_core::{PssError, Result};
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

/// Files produced by one run, keyed by file name.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
}

struct Clock {
    start: Instant,
    on: bool,
}

impl Clock {
    fn new(on: bool) -> Self {
        Self { start: Instant::now(), on }
    }

    fn cell(&self) -> String {
        if self.on {
            format!("{:.3}", self.start.elapsed().as_secs_f64() * 1e3)
        } else {
            String::new()
        }
    }
}

/// Test sample together with the truth solutions on it.
struct Truth {
    points: Vec<Vec<f64>>,
    solutions: Vec<FieldVector>,
}

impl Truth {
    fn new(stiff: &StiffnessSet, test: &TestConfig, seed: u64) -> Result<Self> {
        if test.size == 0 || !(test.radius > 0.0 && test.radius <= 1.0) {
            return Err(PssError::Config(format!(
                "test sample needs size > 0 and radius in (0, 1], got {} and {}",
                test.size, test.radius
            )));
        }
        let dims = stiff.dims();
        let mut points = match test.kind {
            SampleKind::Halton => sampling::halton(dims, test.size),
            SampleKind::Uniform => sampling::uniform(dims, test.size, seed),
        };
        for p in &mut points {
            p.iter_mut().for_each(|v| *v *= test.radius);
        }
        let solutions = points.par_iter().map(|y| stiff.solve(y)).collect::<Result<_>>()?;
        Ok(Self { points, solutions })
    }

    /// `(max, root mean square)` of `||u(y) - approx(y)||_V` over the sample.
    fn errors<F>(&self, stiff: &StiffnessSet, approx: F) -> Result<(f64, f64)>
    where
        F: Fn(&[f64]) -> Result<FieldVector> + Sync,
    {
        let errs: Vec<f64> = self
            .points
            .par_iter()
            .zip(&self.solutions)
            .map(|(y, u)| {
                let mut d = u.clone();
                axpy(-1.0, &approx(y)?, &mut d);
                Ok(stiff.v_norm(&d))
            })
            .collect::<Result<_>>()?;
        let sup = errs.iter().fold(0.0, |m: f64, e| m.max(*e));
        let ms = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
        Ok((sup, ms.sqrt()))
    }

    fn describe(&self, test: &TestConfig, seed: u64) -> String {
        let kind = match test.kind {
            SampleKind::Halton => "halton",
            SampleKind::Uniform => "uniform",
        };
        format!("{kind} size={} radius={} seed={seed}", self.points.len(), test.radius)
    }
}

fn default_surrogate(stiff: &StiffnessSet) -> SurrogateWeights {
    let t = stiff.r / 2.0;
    SurrogateWeights::product_of_radii(stiff.family.psi_norms.iter().map(|b| (1.0 - t) / b).collect())
}

fn error_row(n: usize, card: usize, err: (f64, f64), indicator: Option<f64>, solves: usize, clock: &Clock) -> Vec<String> {
    vec![
        n.to_string(),
        card.to_string(),
        num(err.0),
        num(err.1),
        opt(indicator),
        solves.to_string(),
        clock.cell(),
    ]
}

fn fit_summary(t: &Table) -> RateFit {
    let card = t.column("card").unwrap_or_default();
    let sup = t.column("sup_error").unwrap_or_default();
    let (x, y): (Vec<f64>, Vec<f64>) = card
        .into_iter()
        .zip(sup)
        .filter(|(c, e)| *c > 0.0 && e.is_finite())
        .unzip();
    fit_rate(&x, &y)
}

fn describe_fit(f: &RateFit) -> String {
    match *f {
        RateFit::Algebraic { s, ci, r2, points } => {
            let flag = if f.is_poor() { " poor" } else { "" };
            format!("algebraic s={s:.4} ci={ci:.4} r2={r2:.4} points={points}{flag}")
        }
        RateFit::Exponential { c, ci, r2, points } => format!("exponential c={c:.4} ci={ci:.4} r2={r2:.4} points={points}"),
        RateFit::NoFit { points } => format!("no-fit points={points}"),
    }
}

/// Header lines shared by every table.
pub fn stamp(t: &mut Table, command: &str, hash: &str, seed: u64, wall: bool) {
    t.meta("command", format!("pss {command}"));
    t.meta("config_sha256", hash);
    t.meta("seed", seed);
    t.meta("git_revision", env!("PSS_GIT_REV"));
    t.meta("wall_time", if wall { "on" } else { "off" });
}

fn finish_error_table(mut t: Table, name: &str, title: &str, indicator: &str) -> Outcome {
    let fit = fit_summary(&t);
    t.meta("indicator", indicator);
    t.meta("fit_sup_error_vs_card", describe_fit(&fit));
    let csv = format!("{name}.csv");
    let plot = gnuplot(&csv, title, "card", &["sup_error", "l2_error", "indicator"], true);
    Outcome {
        summary: format!("{name}: {} rows, sup-error fit {}", t.rows.len(), describe_fit(&fit)),
        files: vec![(csv, t.render().into_bytes()), (format!("{name}.gp"), plot.into_bytes())],
    }
}

fn sizes_or(sizes: &[usize], what: &str) -> Result<Vec<usize>> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(PssError::Config(format!("{what} needs a non-empty list of positive sizes")));
    }
    let mut s = sizes.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub hash: &'a str,
}

impl Context<'_> {
    fn table(&self, command: &str, columns: &[&str]) -> Table {
        let mut t = Table::new(columns);
        stamp(&mut t, command, self.hash, self.cfg.seed, self.cfg.output.wall_time);
        t
    }

    fn model(&self) -> Result<StiffnessSet> {
        self.cfg
            .model
            .as_ref()
            .ok_or_else(|| PssError::Config("a model block is required".into()))?
            .build()
    }
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let method = ctx
        .cfg
        .method
        .as_ref()
        .ok_or_else(|| PssError::Config("a method block is required".into()))?;
    match method {
        MethodConfig::Taylor {
            mode,
            sizes,
            surrogate,
            theta,
            eps,
            reference_degree,
            max_steps,
        } => {
            let stiff = ctx.model()?;
            let reference = match reference_degree {
                Some(k) => Some(ReferenceEnergies::compute(&stiff, &total_degree_set(stiff.dims(), *k))?),
                None => None,
            };
            match mode {
                TaylorMode::Apriori => {
                    let w = surrogate.clone().unwrap_or_else(|| default_surrogate(&stiff));
                    taylor_apriori(ctx, &stiff, &w, &sizes_or(sizes, "taylor apriori")?, reference.as_ref())
                }
                TaylorMode::Bulk => taylor_bulk(ctx, &stiff, *theta, *eps, *max_steps, reference.as_ref()),
            }
        }
        MethodConfig::Interp {
            mode,
            sizes,
            seq,
            p,
            surrogate,
            lebesgue_probes,
        } => {
            let stiff = ctx.model()?;
            let sizes = sizes_or(sizes, "interp")?;
            let w = surrogate.clone().unwrap_or_else(|| default_surrogate(&stiff));
            interp_run(ctx, &stiff, *mode, *seq, *p, &w, &sizes, *lebesgue_probes)
        }
        MethodConfig::Legendre {
            dims,
            degree,
            nodes,
            eps,
            c_margin,
        } => legendre_run(ctx, &ctx.model()?, *dims, *degree, *nodes, *eps, *c_margin),
        MethodConfig::Rb {
            eps,
            train,
            n_max,
            strict_covering,
        } => {
            let stiff = ctx.model()?;
            let rb = rb_offline(
                &stiff,
                &RbConfig {
                    eps: *eps,
                    train: *train,
                    n_max: *n_max,
                    strict_covering: *strict_covering,
                },
            )?;
            let mut out = rb_table(ctx, &stiff, &rb)?;
            out.files.extend(bundle_files(&rb)?);
            Ok(out)
        }
        MethodConfig::GreedySynthetic {
            set,
            gamma,
            n,
            selection,
        } => greedy_synthetic(ctx, set, *gamma, *n, *selection),
    }
}

fn taylor_apriori(
    ctx: &Context,
    stiff: &StiffnessSet,
    w: &SurrogateWeights,
    sizes: &[usize],
    reference: Option<&ReferenceEnergies>,
) -> Result<Outcome> {
    let clock = Clock::new(ctx.cfg.output.wall_time);
    let truth = Truth::new(stiff, &ctx.cfg.test, ctx.cfg.seed)?;
    let ap = build_apriori_set(w, *sizes.last().unwrap())?;
    let full = compute_taylor(stiff, &ap.set)?;
    let mut t = ctx.table("taylor --mode apriori", &ERROR_COLUMNS);
    t.meta("test_sample", truth.describe(&ctx.cfg.test, ctx.cfg.seed));
    for (k, &n) in sizes.iter().enumerate() {
        let s = full.prefix(n)?;
        let err = truth.errors(stiff, |y| Ok(s.evaluate(y)))?;
        let ind = reference.map(|r| r.sigma_hat(&s.set)).transpose()?;
        t.push(error_row(k + 1, s.set.len(), err, ind, s.set.len(), &clock));
    }
    Ok(finish_error_table(t, "taylor", "Taylor a priori", "sigma_hat"))
}

fn taylor_bulk(
    ctx: &Context,
    stiff: &StiffnessSet,
    theta: f64,
    eps: f64,
    max_steps: usize,
    reference: Option<&ReferenceEnergies>,
) -> Result<Outcome> {
    let clock = Clock::new(ctx.cfg.output.wall_time);
    let truth = Truth::new(stiff, &ctx.cfg.test, ctx.cfg.seed)?;
    let run = bulk_chase_run(stiff, theta, eps, reference, max_steps)?;
    let mut t = ctx.table("taylor --mode bulk", &ERROR_COLUMNS);
    t.meta("test_sample", truth.describe(&ctx.cfg.test, ctx.cfg.seed));
    t.meta("kappa", num(run.kappa));
    t.meta("reduction_violations", format!("{:?}", run.reduction_violations(theta, eps)));
    for (k, step) in run.steps.iter().enumerate() {
        let s = run.table.surrogate(stiff, &run.iterate(k))?;
        let err = truth.errors(stiff, |y| Ok(s.evaluate(y)))?;
        t.push(error_row(k, step.card, err, step.sigma_hat, step.solves, &clock));
    }
    Ok(finish_error_table(t, "taylor", "Taylor bulk chasing", "sigma_hat"))
}

#[allow(clippy::too_many_arguments)]
fn interp_run(
    ctx: &Context,
    stiff: &StiffnessSet,
    mode: InterpMode,
    seq: SeqKind,
    p: WeightNorm,
    w: &SurrogateWeights,
    sizes: &[usize],
    probes: usize,
) -> Result<Outcome> {
    let clock = Clock::new(ctx.cfg.output.wall_time);
    let truth = Truth::new(stiff, &ctx.cfg.test, ctx.cfg.seed)?;
    let n_max = *sizes.last().unwrap();
    let make = |k: usize| match seq {
        SeqKind::Leja => UnivariateSequence::leja(k, 10_001),
        SeqKind::Rleja => UnivariateSequence::rleja(k),
    };
    let (interp, solves): (SparseInterpolant, Vec<usize>) = match mode {
        InterpMode::Apriori => {
            let ap = build_apriori_set(w, n_max)?;
            let k = ap.set.iter().flat_map(|nu| nu.pairs().iter().map(|&(_, e)| e)).max().unwrap_or(0);
            let i = interpolate(stiff, &ap.set, &make(k as usize))?;
            (i, (1..=ap.set.len()).collect())
        }
        InterpMode::Adaptive => {
            let run = adaptive_interpolate(stiff, n_max, p, &make(n_max))?;
            (run.interp, run.solves)
        }
    };
    let probe_pts = &truth.points[..probes.min(truth.points.len())];
    let mut t = ctx.table("interp", &ERROR_COLUMNS);
    t.meta("test_sample", truth.describe(&ctx.cfg.test, ctx.cfg.seed));
    t.meta("lebesgue_probe_points", probe_pts.len());
    for (k, &n) in sizes.iter().enumerate() {
        if n > interp.set.len() {
            break;
        }
        let pre = interp.prefix(n);
        let err = truth.errors(stiff, |y| Ok(pre.evaluate(y)))?;
        t.push(error_row(k + 1, n, err, Some(pre.lebesgue_probe(probe_pts)), solves[n - 1], &clock));
    }
    Ok(finish_error_table(t, "interp", "Sparse interpolation", "lebesgue_probe"))
}

fn legendre_run(
    ctx: &Context,
    stiff: &StiffnessSet,
    dims: usize,
    degree: u32,
    nodes: usize,
    eps: Option<f64>,
    c_margin: f64,
) -> Result<Outcome> {
    let eps = eps.unwrap_or(stiff.r / 2.0);
    if !(eps > 0.0 && eps < 1.0) || dims == 0 || dims > stiff.dims() {
        return Err(PssError::Config(format!(
            "legendre needs 0 < eps < 1 and 1 <= dims <= {}, got eps = {eps}, dims = {dims}",
            stiff.dims()
        )));
    }
    let set = box_set(dims, degree);
    let lc = legendre_coeffs_quadrature(stiff, &set, dims, nodes)?;
    let rho: Vec<(usize, f64)> = (0..dims).map(|j| (j + 1, (1.0 - eps) / stiff.family.psi_norms[j])).collect();
    let c = c_margin * stiff.v_norm(&lc.w[0]);
    let mut t = ctx.table("legendre", &["nu", "v_norm", "w_norm", "bound"]);
    t.meta("eps", num(eps));
    t.meta("c", num(c));
    let mut violations = 0;
    for (k, nu) in set.iter().enumerate() {
        let w = stiff.v_norm(&lc.w[k]);
        let bound = c * legendre_bound(nu, &rho, 1.0);
        violations += usize::from(w > bound);
        t.push(vec![nu.to_string(), num(stiff.v_norm(&lc.v[k])), num(w), num(bound)]);
    }
    t.meta("bound_violations", violations);
    let plot = gnuplot("legendre.csv", "Legendre coefficients", "order", &["w_norm", "bound"], false)
        .replace("(column('order'))", "($0)");
    Ok(Outcome {
        summary: format!("legendre: {} coefficients, {violations} bound violations", set.len()),
        files: vec![
            ("legendre.csv".into(), t.render().into_bytes()),
            ("legendre.gp".into(), plot.into_bytes()),
        ],
    })
}

fn rb_table(ctx: &Context, stiff: &StiffnessSet, rb: &ReducedBasis) -> Result<Outcome> {
    if rb.dims != stiff.dims() {
        return Err(PssError::Config(format!(
            "bundle has {} parameters but the model has {}",
            rb.dims,
            stiff.dims()
        )));
    }
    let clock = Clock::new(ctx.cfg.output.wall_time);
    let truth = Truth::new(stiff, &ctx.cfg.test, ctx.cfg.seed)?;
    let c = rb.constants;
    let mut t = ctx.table("rb", &ERROR_COLUMNS);
    t.meta("test_sample", truth.describe(&ctx.cfg.test, ctx.cfg.seed));
    t.meta(
        "constants",
        format!(
            "alpha={} R={} delta={} beta={} gamma={}",
            num(c.alpha),
            num(c.r_cont),
            num(c.delta),
            num(c.beta),
            num(c.gamma)
        ),
    );
    t.meta("train_size", rb.train_size);
    t.meta("covering_radius", num(rb.covering_radius));
    t.meta("offline_solves", rb.solves);
    for n in 0..=rb.len() {
        let err = truth.errors(stiff, |y| Ok(rb.lift(&rb.coefficients_at(y, n)?)))?;
        t.push(error_row(n, n, err, rb.surrogate_max.get(n).copied(), n, &clock));
    }
    Ok(finish_error_table(t, "rb", "Reduced basis", "surrogate_max"))
}

const MAGIC: &[u8; 8] = b"PSSRB001";

fn bundle_files(rb: &ReducedBasis) -> Result<Vec<(String, Vec<u8>)>> {
    let json = serde_json::to_vec_pretty(rb).map_err(|e| PssError::Numerical(e.to_string()))?;
    let len = rb.basis.first().map_or(0, |b| b.len());
    let mut bin = Vec::with_capacity(24 + 8 * len * rb.len());
    bin.extend_from_slice(MAGIC);
    bin.extend_from_slice(&(rb.len() as u64).to_le_bytes());
    bin.extend_from_slice(&(len as u64).to_le_bytes());
    for q in &rb.basis {
        for v in q {
            bin.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(vec![("rb_bundle.json".into(), json), ("rb_basis.bin".into(), bin)])
}

pub fn load_bundle(dir: &Path) -> Result<ReducedBasis> {
    let bad = |m: String| PssError::Config(format!("bundle {}: {m}", dir.display()));
    let json = std::fs::read(dir.join("rb_bundle.json")).map_err(|e| bad(e.to_string()))?;
    let mut rb: ReducedBasis = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    let bin = std::fs::read(dir.join("rb_basis.bin")).map_err(|e| bad(e.to_string()))?;
    if bin.len() < 24 || &bin[..8] != MAGIC {
        return Err(bad("basis file has a wrong header".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bin[8 * k..8 * k + 8].try_into().unwrap()) as usize;
    let (count, len) = (word(1), word(2));
    if bin.len() != 24 + 8 * count * len || count != rb.f_n.len() {
        return Err(bad("basis file size does not match the bundle".into()));
    }
    rb.basis = bin[24..]
        .chunks_exact(8 * len.max(1))
        .take(count)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    Ok(rb)
}

pub fn rb_online(ctx: &Context, dir: &Path) -> Result<Outcome> {
    let rb = load_bundle(dir)?;
    rb_table(ctx, &ctx.model()?, &rb)
}

fn synthetic_set(set: &SyntheticSet, n: usize) -> Result<CompactSet> {
    Ok(match set {
        SyntheticSet::Diagonal { x } => {
            let x = x.clone().unwrap_or_else(|| (0..=n).map(|j| 0.5f64.powi(j as i32)).collect());
            CompactSet::diagonal(&x)
        }
        SyntheticSet::Blocks { s, levels } => {
            if *levels == 0 || *levels > 12 {
                return Err(PssError::Config(format!("blocks levels must lie in 1..=12, got {levels}")));
            }
            CompactSet::blocks(*s, *levels)
        }
        SyntheticSet::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| PssError::Config(format!("{path}: {e}")))?;
            let vectors: Vec<Vec<f64>> =
                serde_json::from_str(&text).map_err(|e| PssError::Config(format!("{path}: {e}")))?;
            CompactSet::explicit(vectors)?
        }
    })
}

fn greedy_synthetic(ctx: &Context, set: &SyntheticSet, gamma: f64, n: usize, selection: Selection) -> Result<Outcome> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(PssError::Config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let clock = Clock::new(ctx.cfg.output.wall_time);
    let compact = synthetic_set(set, n)?;
    let trace = weak_greedy(&compact, gamma, n, selection)?;
    let report = matrix_trace(&compact, &trace);
    let mut t = ctx.table("greedy-synthetic", &ERROR_COLUMNS);
    t.meta("set_size", compact.len());
    t.meta("gamma", num(gamma));
    t.meta("p1_violations", report.p1_violations);
    t.meta("p2_violations", report.p2_violations);
    t.meta("orthogonality_loss", num(report.orthogonality_loss));
    for (k, s) in trace.sigma.iter().enumerate() {
        let label = if k < trace.selected.len() { Some(trace.selected[k] as f64) } else { None };
        t.push(error_row(k, k, (*s, f64::NAN), label, 0, &clock));
    }
    Ok(finish_error_table(t, "greedy", "Weak greedy", "selected_label"))
}
