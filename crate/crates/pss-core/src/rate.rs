//! Least-squares rate fits on log scales.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half width of the 95% confidence interval of the slope.
    pub ci: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fit", rename_all = "kebab-case")]
pub enum RateFit {
    /// `error ~ C n^{-s}`
    Algebraic { s: f64, ci: f64, r2: f64, points: usize },
    /// `error ~ C exp(-c n)`
    Exponential { c: f64, ci: f64, r2: f64, points: usize },
    NoFit { points: usize },
}

impl RateFit {
    /// Fits with `R^2` below this are flagged as poor.
    pub const GOOD_R2: f64 = 0.98;

    pub fn is_poor(&self) -> bool {
        match *self {
            RateFit::Algebraic { r2, .. } | RateFit::Exponential { r2, .. } => r2 < Self::GOOD_R2,
            RateFit::NoFit { .. } => true,
        }
    }
}

/// Minimum number of usable points for a fit.
pub const MIN_POINTS: usize = 5;
/// Errors at or below this are discarded.
pub const ERROR_FLOOR: f64 = 1e-12;

fn t_quantile_975(df: usize) -> f64 {
    const T: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= 30 {
        T[df - 1]
    } else {
        1.96
    }
}

/// Ordinary least squares of `y` on `x`; `None` with fewer than two points.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y[..n].iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let ci = if n > 2 {
        t_quantile_975(n - 2) * (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Some(LineFit {
        slope,
        intercept,
        ci,
        r2,
        points: n,
    })
}

fn usable(ns: &[f64], errs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    ns.iter()
        .zip(errs)
        .filter(|(n, e)| **n > 0.0 && **e > ERROR_FLOOR && e.is_finite())
        .map(|(n, e)| (*n, *e))
        .unzip()
}

/// Slope of `log error` against `log n`, reported as the decay rate `s`.
pub fn fit_rate(ns: &[f64], errs: &[f64]) -> RateFit {
    let (n, e) = usable(ns, errs);
    if n.len() < MIN_POINTS {
        return RateFit::NoFit { points: n.len() };
    }
    let lx: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    match fit_line(&lx, &ly) {
        Some(f) => RateFit::Algebraic {
            s: -f.slope,
            ci: f.ci,
            r2: f.r2,
            points: f.points,
        },
        None => RateFit::NoFit { points: n.len() },
    }
}

/// Slope of `log error` against `n`, reported as the decay rate `c`.
pub fn fit_exponential(ns: &[f64], errs: &[f64]) -> RateFit {
    let (n, e) = usable(ns, errs);
    if n.len() < MIN_POINTS {
        return RateFit::NoFit { points: n.len() };
    }
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    match fit_line(&n, &ly) {
        Some(f) => RateFit::Exponential {
            c: -f.slope,
            ci: f.ci,
            r2: f.r2,
            points: f.points,
        },
        None => RateFit::NoFit { points: n.len() },
    }
}
