use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn pss(dir: &Path, args: &[&str], config: &str, envs: &[(&str, &str)]) -> Output {
    let cfg = dir.join("config.in.json");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pss"));
    cmd.args(args).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out"));
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn header(csv: &str) -> String {
    csv.lines().find(|l| !l.starts_with('#')).unwrap().to_string()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let k = header(csv).split(',').position(|c| c == name).unwrap();
    data_rows(csv).iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMOOTH: &str = r#"{ "n_h": 63, "family": { "kind": "smooth", "d": 6, "beta": 2.0, "r_target": 0.4 } }"#;

fn smooth_config(method: &str) -> String {
    format!(r#"{{ "seed": 11, "model": {SMOOTH}, "method": {method}, "test": {{ "size": 200 }} }}"#)
}

#[test]
fn taylor_sup_error_is_geometric_on_single_parameter_model() {
    let (theta, rho) = (0.5, 0.5);
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        r#"{{ "seed": 1, "model": {{ "n_h": 63, "family": {{ "kind": "constant", "theta": {theta} }} }},
            "method": {{ "kind": "taylor", "mode": "apriori" }},
            "test": {{ "kind": "uniform", "size": 500, "radius": {rho} }} }}"#
    );
    let out = pss(dir.path(), &["taylor", "--n", "20"], &cfg, &[]);
    ok(&out);
    let csv = read(dir.path(), "taylor.csv");
    let card = column(&csv, "card");
    assert_eq!(card, (1..=20).map(|n| n as f64).collect::<Vec<_>>());
    let sup = column(&csv, "sup_error");
    let first = sup[1] / sup[0];
    assert!(first <= theta * rho * (1.0 + 1e-9) && first >= 0.95 * theta * rho, "ratio {first}");
    for w in sup.windows(2).take(10) {
        let ratio = w[1] / w[0];
        assert!((ratio / first - 1.0).abs() < 1e-6, "ratio {ratio} vs {first}");
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let cfg = smooth_config(r#"{ "kind": "interp", "mode": "adaptive", "sizes": [2, 4, 8, 16, 24] }"#);
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    ok(&pss(a.path(), &["interp"], &cfg, &[]));
    ok(&pss(b.path(), &["interp"], &cfg, &[]));
    ok(&pss(c.path(), &["interp"], &cfg, &[("PSS_THREADS", "1")]));
    let first = read(a.path(), "interp.csv");
    assert_eq!(first, read(b.path(), "interp.csv"));
    assert_eq!(first, read(c.path(), "interp.csv"));
    assert!(first.contains("# seed: 11"));
    assert!(first.contains("# config_sha256: "));
    assert!(first.contains("# git_revision: "));
    assert!(first.contains("# test_sample: halton size=200"));
}

#[test]
fn taylor_and_interp_share_the_schema() {
    let dir = TempDir::new().unwrap();
    ok(&pss(
        dir.path(),
        &["taylor"],
        &smooth_config(r#"{ "kind": "taylor", "mode": "apriori", "sizes": [1, 5, 10, 20, 30] }"#),
        &[],
    ));
    let taylor = read(dir.path(), "taylor.csv");
    ok(&pss(
        dir.path(),
        &["interp"],
        &smooth_config(r#"{ "kind": "interp", "mode": "apriori", "sizes": [1, 5, 10, 20, 30] }"#),
        &[],
    ));
    let interp = read(dir.path(), "interp.csv");
    assert_eq!(header(&taylor), header(&interp));
    assert_eq!(header(&taylor), "n,card,sup_error,l2_error,indicator,solves,wall_ms");
    assert_eq!(column(&taylor, "solves"), column(&interp, "solves"));
    let plot = read(dir.path(), "interp.gp");
    assert!(plot.contains("column('sup_error')") && plot.contains("'interp.csv'"));
}

#[test]
fn adaptive_rleja_run_reduces_error_and_counts_frontier_solves() {
    let dir = TempDir::new().unwrap();
    ok(&pss(
        dir.path(),
        &["interp", "--mode", "adaptive", "--p", "2", "--seq", "rleja", "--n", "12"],
        &smooth_config(r#"{ "kind": "interp", "mode": "apriori" }"#),
        &[],
    ));
    let csv = read(dir.path(), "interp.csv");
    let sup = column(&csv, "sup_error");
    assert_eq!(sup.len(), 12);
    assert!(sup[11] < 0.25 * sup[0]);
    assert!(column(&csv, "solves")[11] > 12.0);
    let solves = column(&csv, "solves");
    assert!(solves.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn rb_online_reproduces_offline_table() {
    let cfg = smooth_config(r#"{ "kind": "rb", "eps": 1e-4, "train": { "kind": "lds", "m": 300 }, "n_max": 12 }"#);
    let off = TempDir::new().unwrap();
    ok(&pss(off.path(), &["rb"], &cfg, &[]));
    let bundle = off.path().join("out");
    assert!(bundle.join("rb_bundle.json").exists() && bundle.join("rb_basis.bin").exists());
    let on = TempDir::new().unwrap();
    ok(&pss(on.path(), &["rb", "--online", bundle.to_str().unwrap()], &cfg, &[]));
    let a = read(off.path(), "rb.csv");
    let b = read(on.path(), "rb.csv");
    assert_eq!(data_rows(&a), data_rows(&b));
    let sup = column(&a, "sup_error");
    assert!(sup.last().unwrap() < &(0.01 * sup[0]));
}

#[test]
fn greedy_diagonal_widths() {
    let dir = TempDir::new().unwrap();
    ok(&pss(dir.path(), &["greedy-synthetic", "--set", "diagonal", "--n", "10"], r#"{ "seed": 0 }"#, &[]));
    let csv = read(dir.path(), "greedy.csv");
    let sigma = column(&csv, "sup_error");
    for (n, s) in sigma.iter().enumerate() {
        assert_eq!(*s, 0.5f64.powi(n as i32));
    }
    assert!(csv.contains("# p1_violations: 0") && csv.contains("# p2_violations: 0"));
}

#[test]
fn legendre_table_has_bound_column() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{ "seed": 0, "model": { "n_h": 63, "family": { "kind": "disjoint", "theta": [0.5, 0.3] } } }"#;
    ok(&pss(dir.path(), &["legendre", "--dims", "2", "--degree", "4", "--nodes", "12"], cfg, &[]));
    let csv = read(dir.path(), "legendre.csv");
    assert_eq!(header(&csv), "nu,v_norm,w_norm,bound");
    assert_eq!(data_rows(&csv).len(), 25);
    assert!(csv.contains("# bound_violations: 0"));
}

#[test]
fn schema_errors_exit_with_code_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (vec!["taylor", "--n", "5"], r#"{ "model": {"n_h": 15, "family": {"kind": "constant", "theta": 0.5}} }"#),
        (vec!["taylor", "--n", "5"], r#"{ "seed": 1, "model": {"n_h": 15, "family": {"kind": "constant", "theta": 0.5}}, "bogus": 1 }"#),
        (vec!["taylor", "--n", "5"], r#"{ "seed": 1, "model": {"n_h": 15, "family": {"kind": "constant", "theta": 1.5}} }"#),
        (vec!["taylor", "--n", "5"], r#"{ "seed": 1, "model": {"n_h": 15, "domain": [0, 2], "family": {"kind": "constant", "theta": 0.5}} }"#),
        (vec!["interp", "--n", "5"], r#"{ "seed": 1, "model": {"n_h": 15, "family": {"kind": "constant", "theta": 0.5}}, "method": {"kind": "taylor", "mode": "bulk"} }"#),
        (vec!["rb", "--eps", "0.1", "--train", "lattice:3"], r#"{ "seed": 1, "model": {"n_h": 15, "family": {"kind": "smooth", "d": 5, "beta": 2, "r_target": 0.5}} }"#),
        (vec!["taylor", "--n", "5"], "not json"),
    ];
    for (args, cfg) in cases {
        let out = pss(dir.path(), &args, cfg, &[]);
        assert_eq!(out.status.code(), Some(2), "{args:?} {cfg}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = pss(
        dir.path(),
        &["taylor", "--n", "5"],
        r#"{ "seed": 1, "model": {"n_h": 15, "family": {"kind": "constant", "theta": 0.5}} }"#,
        &[("PSS_THREADS", "zero")],
    );
    assert_eq!(out.status.code(), Some(2));
}
