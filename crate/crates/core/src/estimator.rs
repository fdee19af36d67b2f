//! The Hurst estimator: root of `c(x) N^-2x / 2 = S_N` on `[1/2, 1]`.

use serde::Serialize;

use crate::analytic::{self, HurstParam};
use crate::error::{Error, Result};
use crate::filters::Filter;
use crate::variation;

/// Bracket width at which bisection stops.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: u32,
    pub bracket: [f64; 2],
    /// `F_N(h_hat) = c(h_hat) N^(-2 h_hat) / 2 - S_N`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub h_hat: f64,
    pub std_err: f64,
    pub n: usize,
    pub filter: String,
    pub s_n: f64,
    pub solver: SolverDiagnostics,
    pub monotonicity_bound: f64,
    /// `N > N*`, so `F_N` is strictly decreasing and the root is unique.
    pub n_large_enough: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_true: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_error: Option<f64>,
}

// ratio sum a a log|q-r| |q-r|^2x / sum a a |q-r|^2x over the autocorrelation
fn log_ratio(beta: &[f64], l: i64, x: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, b) in beta.iter().enumerate() {
        let d = (i as i64 - l).abs();
        if d == 0 {
            continue;
        }
        let p = (d as f64).powf(2.0 * x);
        num += b * (d as f64).ln() * p;
        den += b * p;
    }
    if den == 0.0 {
        return if num > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    num / den
}

/// `N* = max_(x in [1/2, 1]) exp(sum a a log|q-r| |q-r|^2x / sum a a |q-r|^2x)`;
/// `F_N` is strictly decreasing on `[1/2, 1]` for `N > N*`.
///
/// The denominator is `-c(x)`, which vanishes at `x = 1` for filters of order
/// at least 2; the ratio's limit there is taken from the numerator's sign.
pub fn monotonicity_bound(filter: &Filter) -> f64 {
    let beta = filter.autocorrelation();
    let l = filter.len() as i64;
    let g = |x: f64| log_ratio(&beta, l, x);
    const GRID: usize = 4000;
    let (mut best_x, mut best) = (0.5, f64::NEG_INFINITY);
    for i in 0..=GRID {
        let x = 0.5 + 0.5 * i as f64 / GRID as f64;
        let v = g(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    if best.is_infinite() {
        return best.exp();
    }
    // Golden-section refinement around the best grid point.
    let step = 0.5 / GRID as f64;
    let (mut a, mut b) = ((best_x - step).max(0.5), (best_x + step).min(1.0));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if g(c) >= g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(g(0.5 * (a + b))).exp()
}

/// `F_N(x) = c(x) N^-2x / 2 - S_N`.
pub fn estimating_function(filter: &Filter, n: usize, s_n: f64, x: f64) -> f64 {
    0.5 * analytic::c_of_h(filter, x) * (n as f64).powf(-2.0 * x) - s_n
}

/// Solve `c(x) N^-2x / 2 = S_N` by bisection on the log form
/// `log c(x) - 2x log N - log(2 S_N)`.
pub fn solve(filter: &Filter, n: usize, s_n: f64) -> Result<(f64, SolverDiagnostics)> {
    if !(s_n > 0.0) {
        return Err(Error::DegeneratePath);
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need N >= 2, got {n}")));
    }
    let log_n = (n as f64).ln();
    let target = (2.0 * s_n).ln();
    let g = |x: f64| analytic::c_of_h(filter, x).ln() - 2.0 * x * log_n - target;
    let (mut lo, mut hi) = (0.5, 1.0);
    if g(lo) < 0.0 {
        return Err(Error::OutOfRange { clamped: lo });
    }
    if g(hi) > 0.0 {
        return Err(Error::OutOfRange { clamped: hi });
    }
    let mut iterations = 0;
    while hi - lo >= ROOT_TOL && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let h_hat = 0.5 * (lo + hi);
    Ok((h_hat, SolverDiagnostics { iterations, bracket: [lo, hi], residual: estimating_function(filter, n, s_n, h_hat) }))
}

/// `sqrt(c2(h_hat)) / (2 N^(1 - h_hat) log N)`.
pub fn standard_error(h_hat: f64, n: usize, filter: &Filter) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("standard error needs N >= 3, got {n}")));
    }
    let h = HurstParam::new(h_hat)?;
    let nf = n as f64;
    Ok(analytic::c2(filter, &h).sqrt() / (2.0 * nf.powf(1.0 - h_hat) * nf.ln()))
}

/// `2 c2(h_hat)^(-1/2) N^(1 - h_hat) log N (h_hat - h_true)`, i.e. the
/// estimation error in units of the standard error.
pub fn normalized_error_stat(h_hat: f64, h_true: f64, n: usize, filter: &Filter) -> Result<f64> {
    Ok((h_hat - h_true) / standard_error(h_hat, n, filter)?)
}

/// Estimate from a path. Out-of-range and degenerate paths are errors.
pub fn estimate_hurst(values: &[f64], filter: &Filter) -> Result<EstimateReport> {
    let s = variation::s_n(values, filter)?;
    estimate_from_s_n(s, values.len() - 1, filter)
}

pub fn estimate_from_s_n(s_n: f64, n: usize, filter: &Filter) -> Result<EstimateReport> {
    let (h_hat, solver) = solve(filter, n, s_n)?;
    let bound = monotonicity_bound(filter);
    // The root may sit at the edge of the bracket, where c2 degenerates.
    let std_err = standard_error(h_hat, n, filter).unwrap_or(f64::NAN);
    Ok(EstimateReport {
        h_hat,
        std_err,
        n,
        filter: filter.id(),
        s_n,
        solver,
        monotonicity_bound: bound,
        n_large_enough: (n as f64) > bound,
        h_true: None,
        normalized_error: None,
    })
}

impl EstimateReport {
    pub fn with_truth(mut self, h_true: f64, filter: &Filter) -> Result<Self> {
        self.normalized_error = Some(normalized_error_stat(self.h_hat, h_true, self.n, filter)?);
        self.h_true = Some(h_true);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_inversion() {
        let f = Filter::finite_difference(2).unwrap();
        let n = 1000;
        let s = 0.5 * analytic::c_of_h(&f, 0.7) * (n as f64).powf(-1.4);
        let r = estimate_from_s_n(s, n, &f).unwrap();
        assert!((r.h_hat - 0.7).abs() < 1e-8);
        assert!(r.solver.residual.abs() < 1e-12);
        assert!(r.solver.bracket[1] - r.solver.bracket[0] < ROOT_TOL);
        assert!(r.n_large_enough);
    }

    #[test]
    fn degenerate_and_out_of_range() {
        let f = Filter::finite_difference(2).unwrap();
        assert_eq!(estimate_hurst(&[3.0; 50], &f).unwrap_err(), Error::DegeneratePath);
        // S_N far above c(1/2) / (2 sqrt(N)) forces x below 1/2
        assert_eq!(solve(&f, 100, 1e3).unwrap_err(), Error::OutOfRange { clamped: 0.5 });
        let fd1 = Filter::finite_difference(1).unwrap();
        assert_eq!(solve(&fd1, 100, 1e-12).unwrap_err(), Error::OutOfRange { clamped: 1.0 });
    }

    #[test]
    fn bound_examples() {
        let fd1 = Filter::finite_difference(1).unwrap();
        assert!((monotonicity_bound(&fd1) - 1.0).abs() < 1e-15);
        let fd2 = Filter::finite_difference(2).unwrap();
        // ratio log 2 * 4^x / (4^x - 4), maximal at x = 1/2
        assert!((monotonicity_bound(&fd2) - 0.5).abs() < 1e-12);
        for f in [Filter::finite_difference(4).unwrap(), Filter::daubechies(4).unwrap()] {
            let b = monotonicity_bound(&f);
            assert!(b.is_finite() && b > 0.0, "{}: {b}", f.id());
        }
    }

    #[test]
    fn standard_error_shape() {
        let f = Filter::finite_difference(2).unwrap();
        let a = standard_error(0.7, 1000, &f).unwrap();
        let b = standard_error(0.7, 10_000, &f).unwrap();
        assert!(b < a);
        assert_eq!(normalized_error_stat(0.7, 0.7, 1000, &f).unwrap(), 0.0);
        assert!(normalized_error_stat(0.69, 0.7, 1000, &f).unwrap() < 0.0);
    }
}
