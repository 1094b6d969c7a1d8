//! Acceptance criteria 1-14. Each check prints one `PASS`/`FAIL` line; the
//! process exits with a failure status if any check fails.

use pss_core::greedy::*;
use pss_core::interp::*;
use pss_core::legendre::*;
use pss_core::linalg::axpy;
use pss_core::model::*;
use pss_core::multiindex::*;
use pss_core::rate::*;
use pss_core::sampling;
use pss_core::taylor::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn report(id: u32, title: &str, pass: bool, detail: String) {
    println!(
        "acceptance criterion {id:>2} [{title}]: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn disjoint(thetas: &[f64], n_h: usize) -> StiffnessSet {
    let space = FemSpace::new(n_h).unwrap();
    let fam = AffineCoefficientFamily::disjoint(&space, thetas).unwrap();
    StiffnessSet::assemble(fam, space, &Load::Constant(1.0)).unwrap()
}

/// Graded strengths for which the finite margin keeps fewer than 4 dimensions.
const GRADED: [f64; 4] = [0.5, 1e-2, 1e-4, 1e-7];
const D4: [f64; 4] = [0.5, 0.4, 0.3, 0.2];

fn monomial(nu: &MultiIndex, y: &[f64]) -> f64 {
    nu.pairs().iter().map(|&(j, e)| y[j - 1].powi(e as i32)).product()
}

fn criterion_01_interpolation_exactness() {
    let start = Instant::now();
    let seq = UnivariateSequence::leja(30, 10_001);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let dims = rng.gen_range(1..=5);
        let card = rng.gen_range(1..=30);
        let set = random_downward_closed(&mut rng, dims, card);
        let coef: Vec<f64> = (0..set.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let members = set.members().to_vec();
        let p = move |y: &[f64]| -> f64 { members.iter().zip(&coef).map(|(nu, c)| c * monomial(nu, y)).sum() };
        let scale = sampling::uniform(dims, 100, case).iter().map(|y| p(y).abs()).fold(0.0, f64::max);
        let target = FnTarget { dims, f: |y: &[f64]| vec![p(y)] };
        let i = interpolate(&target, &set, &seq).unwrap();
        for y in sampling::uniform(dims, 100, 1000 + case) {
            worst = worst.max((i.evaluate(&y)[0] - p(&y)).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "interpolation exactness",
        worst <= 1e-10 && secs < 30.0,
        format!("max relative error {worst:.2e} (tol 1e-10), {secs:.1}s (limit 30s)"),
    );
}

fn criterion_02_leja_lebesgue_growth() {
    let start = Instant::now();
    let seq = UnivariateSequence::leja(50, 10_001);
    let mut worst_k = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 0..=50 {
        let l = lebesgue_constant_1d(&seq, k, 100_000);
        let excess = l - (1.0 + k as f64);
        if excess > worst_excess {
            worst_excess = excess;
            worst_k = k;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "Leja Lebesgue growth",
        worst_excess <= 0.0 && secs < 60.0,
        format!("max (lambda_k - (1+k)) = {worst_excess:.3} at k = {worst_k}, {secs:.1}s (limit 60s)"),
    );
}

fn criterion_03_multivariate_lebesgue() {
    let seq = UnivariateSequence::leja(25, 10_001);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for case in 0..50 {
        let dims = rng.gen_range(1..=3);
        let card = rng.gen_range(1..=25);
        let set = random_downward_closed(&mut rng, dims, card);
        let l = lebesgue_probe(&set, &seq, &sampling::uniform(dims, 10_000, case));
        let bound = (set.len() as f64).powi(3);
        worst_ratio = worst_ratio.max(l / bound);
        if l > bound {
            violations += 1;
        }
    }
    report(
        3,
        "multivariate Lebesgue bound",
        violations == 0,
        format!("{violations} violations of L <= (#Lambda)^3 over 50 sets, max ratio {worst_ratio:.3}"),
    );
}

fn criterion_04_taylor_recursion() {
    let theta = 0.6;
    let space = FemSpace::new(63).unwrap();
    let fam = AffineCoefficientFamily::constant(&space, theta).unwrap();
    let s = StiffnessSet::assemble(fam, space, &Load::Constant(1.0)).unwrap();
    let t = compute_taylor(&s, &total_degree_set(1, 12)).unwrap();
    let mut worst_geo = 0.0f64;
    for k in 0..=12u32 {
        let ratio = t.v_norms[t.set.position(&MultiIndex::from_dense(&[k])).unwrap()] / t.v_norms[0];
        worst_geo = worst_geo.max((ratio / theta.powi(k as i32) - 1.0).abs());
    }

    let s4 = disjoint(&D4, 127);
    let t4 = compute_taylor(&s4, &total_degree_set(4, 1)).unwrap();
    let h = 1e-4;
    let mut worst_fd = 0.0f64;
    for j in 1..=4 {
        let mut yp = vec![0.0; 4];
        let mut ym = vec![0.0; 4];
        yp[j - 1] = h;
        ym[j - 1] = -h;
        let mut fd = s4.solve(&yp).unwrap();
        axpy(-1.0, &s4.solve(&ym).unwrap(), &mut fd);
        fd.iter_mut().for_each(|v| *v /= 2.0 * h);
        let tj = t4.coeff(&MultiIndex::unit(j)).unwrap();
        let mut diff = fd.clone();
        axpy(-1.0, tj, &mut diff);
        worst_fd = worst_fd.max(s4.v_norm(&diff) / s4.v_norm(tj));
    }
    report(
        4,
        "Taylor recursion",
        worst_geo <= 1e-8 && worst_fd <= 1e-6,
        format!("geometric ratio error {worst_geo:.2e} (tol 1e-8), central difference error {worst_fd:.2e} (tol 1e-6)"),
    );
}

fn criterion_05_saturation() {
    let s = disjoint(&D4, 127);
    let c = SaturationConstants::new(&s);
    let boxed = box_set(4, 8);
    let t = compute_taylor(&s, &boxed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let card = rng.gen_range(1..=60);
        let set = random_downward_closed_in_box(&mut rng, 4, card, 7);
        let m = margin(&set, 4).unwrap();
        let (mut sig_a, mut sig_v, mut e_a, mut e_v) = (0.0, 0.0, 0.0, 0.0);
        for (k, nu) in boxed.iter().enumerate() {
            let (da, dv) = (t.d[k], t.v_norms[k] * t.v_norms[k]);
            if m.contains(nu) {
                e_a += da;
                e_v += dv;
            }
            if !set.contains(nu) {
                sig_a += da;
                sig_v += dv;
            }
        }
        let ra = sig_a / (c.delta_abar * e_a);
        let rv = sig_v / (c.delta * e_v);
        worst = worst.max(ra).max(rv);
        if ra > 1.0 || rv > 1.0 {
            violations += 1;
        }
    }
    report(
        5,
        "saturation",
        violations == 0,
        format!(
            "{violations} violations over 30 sets (abar energies with delta_abar = {:.3}, V energies with delta = {:.3}), max ratio {worst:.3}",
            c.delta_abar, c.delta
        ),
    );
}

fn criterion_06_bulk_reduction() {
    let start = Instant::now();
    let (theta, eps) = (0.5, 1e-8);
    let s = disjoint(&D4, 127);
    let reference = ReferenceEnergies::compute(&s, &total_degree_set(4, 40)).unwrap();
    let run = bulk_chase_run(&s, theta, eps, Some(&reference), 500).unwrap();
    let v = run.reduction_violations(theta, eps);
    let last = run.steps.last().unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "bulk chasing reduction",
        v.is_empty() && last.margin_energy <= 2.0 * theta * eps && secs < 120.0,
        format!(
            "{} violations over {} steps, kappa = {:.4}, final #Lambda = {}, e(M~) = {:.2e}, {secs:.1}s (limit 120s)",
            v.len(),
            run.steps.len(),
            run.kappa,
            last.card,
            last.margin_energy
        ),
    );
}

fn criterion_07_sparse_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut violations = 0;
    let mut cases = 0;
    let mut worst = 0.0f64;
    let mut kept = vec![];
    for thetas in [D4, GRADED] {
        let s = disjoint(&thetas, 127);
        for eps in [1e-4, 1e-6] {
            for _ in 0..10 {
                let card = rng.gen_range(1..=40);
                let set = random_downward_closed(&mut rng, 4, card);
                let t = compute_taylor(&s, &set).unwrap();
                let sm = sparse_margin(&s, &set, t.d.iter().sum(), eps).unwrap();
                let full = margin(&set, 4).unwrap();
                let mut table = TaylorTable::new();
                table.ensure(&s, &full, true).unwrap();
                let missed: f64 = full
                    .iter()
                    .filter(|nu| !sm.indices.contains(nu))
                    .map(|nu| s.v_norm(table.get(nu).unwrap()).powi(2))
                    .sum();
                worst = worst.max(missed / eps);
                kept.push(sm.j_keep);
                cases += 1;
                if missed > eps {
                    violations += 1;
                }
            }
        }
    }
    report(
        7,
        "finite margin guarantee",
        violations == 0,
        format!("{violations} violations over {cases} cases, max e(M \\ M~)/eps = {worst:.2e}, kept dimensions {kept:?}"),
    );
}

fn criterion_08_disjoint_rank() {
    let start = Instant::now();
    let s = disjoint(&[0.5; 4], 255);
    let sv = snapshot_widths(&s, &sampling::uniform(4, 200, 808), InnerProduct::VNorm).unwrap();
    let beyond = sv[7..].iter().fold(0.0f64, |m, v| m.max(v / sv[0]));
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        "disjoint inclusion rank",
        beyond <= 1e-10 && secs < 30.0,
        format!(
            "sigma_7/sigma_1 = {:.2e}, max sigma_k/sigma_1 for k > 7 = {beyond:.2e} (tol 1e-10), {secs:.1}s (limit 30s)",
            sv[6] / sv[0]
        ),
    );
}

fn criterion_09_neumann_width_decay() {
    let theta = 0.5f64;
    let s = disjoint(&[theta; 2], 255);
    let sv = snapshot_widths(&s, &sampling::uniform(2, 200, 909), InnerProduct::VNorm).unwrap();
    let k: Vec<f64> = (2..=10).map(|k| k as f64).collect();
    let ls: Vec<f64> = (2..=10).map(|k| (sv[k - 1] / sv[0]).ln()).collect();
    let fit = fit_line(&k, &ls).unwrap();
    let target = theta.ln();
    let rel = (fit.slope - target).abs() / target.abs();
    report(
        9,
        "Neumann-series width decay",
        rel <= 0.2,
        format!(
            "fitted slope {:.3} vs log(theta) = {target:.3} (relative gap {rel:.2}, tol 0.20); normalized singular values 1-5: {:.2e}",
            fit.slope,
            ListFmt(&sv[..5].iter().map(|v| v / sv[0]).collect::<Vec<_>>())
        ),
    );
}

struct ListFmt<'a>(&'a [f64]);

impl std::fmt::LowerExp for ListFmt<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            std::fmt::LowerExp::fmt(v, f)?;
        }
        Ok(())
    }
}

fn runs() -> Vec<(f64, Selection)> {
    vec![(1.0, Selection::Maximal), (0.5, Selection::Weakest)]
}

fn criterion_10_greedy_rates() {
    let x: Vec<f64> = (0..30).map(|j| 0.5f64.powi(j)).collect();
    let diag = CompactSet::diagonal(&x);
    let t = weak_greedy(&diag, 1.0, 30, Selection::Maximal).unwrap();
    let a_ok = t.selected == (0..30).collect::<Vec<_>>() && (0..30).all(|n| t.sigma[n] == x[n]);

    let blocks = CompactSet::blocks(1.0, 10);
    let mut b_viol = 0;
    for (gamma, sel) in runs() {
        let t = weak_greedy(&blocks, gamma, 256, sel).unwrap();
        for n in 1..=256 {
            if t.sigma[n] > gamma.powi(-2) * 2f64.powi(5) / n as f64 {
                b_viol += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut c_viol = 0;
    for _ in 0..10 {
        let count = rng.gen_range(20..60);
        let dim = rng.gen_range(10..30);
        let set = CompactSet::random(&mut rng, count, dim, 0.6);
        let d = pod_widths(&set.vectors, dim.min(count));
        for (gamma, sel) in runs() {
            let t = weak_greedy(&set, gamma, count, sel).unwrap();
            for n in 0..d.len() {
                let s2n = t.sigma.get(2 * n).copied().unwrap_or(0.0);
                if s2n > (2.0 * d[0] * d[n]).sqrt() / gamma * (1.0 + 1e-12) {
                    c_viol += 1;
                }
            }
        }
    }
    report(
        10,
        "greedy rate preservation",
        a_ok && b_viol == 0 && c_viol == 0,
        format!("(a) diagonal exact: {a_ok}; (b) block violations: {b_viol}; (c) width violations: {c_viol}"),
    );
}

fn criterion_11_matrix_properties() {
    let mut traces: Vec<(CompactSet, GreedyTrace)> = vec![];
    let x: Vec<f64> = (0..30).map(|j| 0.5f64.powi(j)).collect();
    let diag = CompactSet::diagonal(&x);
    traces.push((diag.clone(), weak_greedy(&diag, 1.0, 30, Selection::Maximal).unwrap()));
    let blocks = CompactSet::blocks(1.0, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut sets = vec![blocks];
    for _ in 0..10 {
        let count = rng.gen_range(20..60);
        let dim = rng.gen_range(10..30);
        sets.push(CompactSet::random(&mut rng, count, dim, 0.6));
    }
    let model = {
        let space = FemSpace::new(127).unwrap();
        let fam = AffineCoefficientFamily::smooth(&space, 4, 2.0, 0.3).unwrap();
        StiffnessSet::assemble(fam, space, &Load::Constant(1.0)).unwrap()
    };
    sets.push(CompactSet::from_model(&model, &sampling::halton(4, 200), InnerProduct::VNorm).unwrap());
    sets.push(CompactSet::from_model(&disjoint(&D4, 127), &sampling::halton(4, 200), InnerProduct::VNorm).unwrap());
    for set in sets {
        for (gamma, sel) in runs() {
            let t = weak_greedy(&set, gamma, 256, sel).unwrap();
            traces.push((set.clone(), t));
        }
    }
    let (mut p1, mut p2, mut reorth) = (0, 0, 0);
    for (set, t) in &traces {
        let rep = matrix_trace(set, t);
        p1 += rep.p1_violations;
        p2 += rep.p2_violations;
        reorth += rep.reorthogonalized as usize;
    }
    report(
        11,
        "greedy matrix properties",
        p1 == 0 && p2 == 0,
        format!("{} traces: P1 violations {p1}, P2 violations {p2} (tol 1e-10), reorthogonalized {reorth}", traces.len()),
    );
}

fn criterion_12_rb_surrogate_equivalence() {
    let space = FemSpace::new(255).unwrap();
    let fam = AffineCoefficientFamily::smooth(&space, 4, 2.0, 0.3).unwrap();
    let s = StiffnessSet::assemble(fam, space, &Load::Constant(1.0)).unwrap();
    let cfg = RbConfig {
        eps: 1e-10,
        train: TrainingSet::Lds { m: 500 },
        n_max: 10,
        strict_covering: false,
    };
    let rb = rb_offline(&s, &cfg).unwrap();
    let c = rb.constants;
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let mut violations = 0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for y in sampling::uniform(4, 50, 1213) {
        let k = rng.gen_range(0..=rb.len());
        let u = s.solve(&y).unwrap();
        let dist = projection_distance(&s, &rb, &u, k);
        let d = rb.surrogate_at(&y, k).unwrap();
        lo = lo.min(dist / d);
        hi = hi.max(dist / d);
        if c.delta * d > dist || dist > c.beta * d {
            violations += 1;
        }
    }
    report(
        12,
        "reduced basis surrogate equivalence",
        violations == 0,
        format!(
            "{violations} violations over 50 (y,k); dist/d in [{lo:.3}, {hi:.3}] vs [delta, beta] = [{:.3}, {:.3}]",
            c.delta, c.beta
        ),
    );
}

fn criterion_13_end_to_end_rate() {
    let start = Instant::now();
    let dims = 20;
    let space = FemSpace::new(255).unwrap();
    let fam = AffineCoefficientFamily::smooth(&space, dims, 3.0, 0.5).unwrap();
    let s = StiffnessSet::assemble(fam, space, &Load::Constant(1.0)).unwrap();
    let t = s.r / 2.0;
    let rho: Vec<f64> = s.family.psi_norms.iter().map(|b| (1.0 - t) / b).collect();
    let ap = build_apriori_set(&SurrogateWeights::product_of_radii(rho), 200).unwrap();
    let full = compute_taylor(&s, &ap.set).unwrap();
    let ys = sampling::halton(dims, 2000);
    let truth: Vec<FieldVector> = ys.iter().map(|y| s.solve(y).unwrap()).collect();
    let ns = [5usize, 10, 20, 30, 50, 75, 100, 150, 200];
    let mut errs = vec![];
    for &n in &ns {
        let surr = full.prefix(n).unwrap();
        let err = ys
            .iter()
            .zip(&truth)
            .map(|(y, u)| {
                let mut d = u.clone();
                axpy(-1.0, &surr.evaluate(y), &mut d);
                s.v_norm(&d)
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = fit_rate(&nf, &errs);
    let secs = start.elapsed().as_secs_f64();
    let slope = match fit {
        RateFit::Algebraic { s, .. } => s,
        _ => f64::NAN,
    };
    report(
        13,
        "end-to-end Taylor rate",
        slope >= 1.5 && secs < 300.0,
        format!("fitted sup-error rate {fit:?} (need s >= 1.5), {secs:.1}s (limit 300s)"),
    );
}

fn criterion_14_coefficient_bounds() {
    let s = disjoint(&D4, 127);
    let t = s.r / 2.0;
    let b: Vec<f64> = s.family.psis.iter().map(|p| p.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (1.0 - t)).collect();
    let boxed = box_set(4, 6);
    let tay = compute_taylor(&s, &boxed).unwrap();
    let c_t = 1.1 * tay.v_norms[0];
    let mut tv = 0;
    for (nu, v) in boxed.iter().zip(&tay.v_norms) {
        let bound = c_t * nu.pairs().iter().map(|&(j, e)| b[j - 1].powi(e as i32)).product::<f64>();
        if *v > bound {
            tv += 1;
        }
    }

    let s2 = disjoint(&[0.5, 0.3], 127);
    let eps = s2.r / 2.0;
    let rho: Vec<(usize, f64)> = s2
        .family
        .psis
        .iter()
        .enumerate()
        .map(|(j, p)| (j + 1, (1.0 - eps) / p.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
        .collect();
    let box2 = box_set(2, 6);
    let lc = legendre_coeffs_quadrature(&s2, &box2, 2, 20).unwrap();
    let c_w = 1.1 * s2.v_norm(&lc.w[0]);
    let mut wv = 0;
    for (k, nu) in box2.iter().enumerate() {
        if s2.v_norm(&lc.w[k]) > c_w * legendre_bound(nu, &rho, 1.0) {
            wv += 1;
        }
    }
    report(
        14,
        "coefficient bounds",
        tv == 0 && wv == 0,
        format!(
            "Taylor violations {tv}/{} (degree-6 box, 4 dims), Legendre violations {wv}/{} (degree-6 box, 2 dims)",
            boxed.len(),
            box2.len()
        ),
    );
}

fn main() {
    let checks: [(&str, fn()); 14] = [
        ("criterion_01_interpolation_exactness", criterion_01_interpolation_exactness),
        ("criterion_02_leja_lebesgue_growth", criterion_02_leja_lebesgue_growth),
        ("criterion_03_multivariate_lebesgue", criterion_03_multivariate_lebesgue),
        ("criterion_04_taylor_recursion", criterion_04_taylor_recursion),
        ("criterion_05_saturation", criterion_05_saturation),
        ("criterion_06_bulk_reduction", criterion_06_bulk_reduction),
        ("criterion_07_sparse_margin", criterion_07_sparse_margin),
        ("criterion_08_disjoint_rank", criterion_08_disjoint_rank),
        ("criterion_09_neumann_width_decay", criterion_09_neumann_width_decay),
        ("criterion_10_greedy_rates", criterion_10_greedy_rates),
        ("criterion_11_matrix_properties", criterion_11_matrix_properties),
        ("criterion_12_rb_surrogate_equivalence", criterion_12_rb_surrogate_equivalence),
        ("criterion_13_end_to_end_rate", criterion_13_end_to_end_rate),
        ("criterion_14_coefficient_bounds", criterion_14_coefficient_bounds),
    ];
    std::panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| info.payload().downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        eprintln!("  {msg}");
    }));
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, f)| std::panic::catch_unwind(f).is_err())
        .map(|(name, _)| *name)
        .collect();
    println!("acceptance: {} passed, {} failed {:?}", checks.len() - failed.len(), failed.len(), failed);
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
