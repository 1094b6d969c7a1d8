//! CSV tables with `#` metadata and matching gnuplot scripts.

use std::fmt::Write as _;
use std::path::Path;

/// Columns shared by every error-curve experiment.
pub const ERROR_COLUMNS: [&str; 7] = ["n", "card", "sup_error", "l2_error", "indicator", "solves", "wall_ms"];

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        String::new()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: vec![],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[k].parse().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

/// Log-log plot of `ys` against `x`, columns addressed by name.
pub fn gnuplot(csv: &str, title: &str, x: &str, ys: &[&str], logx: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{x}'");
    if logx {
        let _ = writeln!(s, "set logscale x");
    }
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set format y '10^{{%L}}'");
    let _ = writeln!(s, "set terminal pngcairo size 800,600");
    let png = csv.trim_end_matches(".csv");
    let _ = writeln!(s, "set output '{png}.png'");
    let plots: Vec<String> = ys
        .iter()
        .map(|y| format!("'{csv}' using (column('{x}')):(column('{y}')) with linespoints title '{y}'"))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

pub fn write(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)
}
