//! Filtered quadratic variations of a sampled path.
//!
//! Both `S_N` and `V_N` average over `i = l..N-1` with divisor `N - l`, so
//! `V_N = S_N / pi(0) - 1` holds exactly.

use serde::Serialize;

use crate::analytic::{self, HurstParam};
use crate::error::{Error, Result};
use crate::filters::Filter;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationReport {
    pub s_n: f64,
    pub v_n: Option<f64>,
    pub adjusted: Option<f64>,
    pub n: usize,
    pub filter: String,
    pub h_used: Option<f64>,
}

fn check_len(values: &[f64], filter: &Filter) -> Result<usize> {
    let l = filter.len();
    if values.len() < l + 2 {
        return Err(Error::PathTooShort { path_len: values.len(), filter_len: l, needed: l + 2 });
    }
    Ok(values.len() - 1)
}

/// `V(i/N) = sum_q a_q Z((i - q)/N)` for `i = l..N-1`.
pub fn filtered_series(values: &[f64], filter: &Filter) -> Result<Vec<f64>> {
    let n = check_len(values, filter)?;
    let a = filter.coeffs();
    let l = filter.len();
    Ok((l..n)
        .map(|i| a.iter().enumerate().map(|(q, aq)| aq * values[i - q]).sum())
        .collect())
}

/// Mean square of the filtered series.
pub fn s_n(values: &[f64], filter: &Filter) -> Result<f64> {
    let v = filtered_series(values, filter)?;
    Ok(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
}

/// `pi(0) = N^-2H c(H) / 2`, the expectation of `S_N` under the model.
pub fn expected_s_n(filter: &Filter, h: f64, n: usize) -> f64 {
    analytic::pi_alpha(filter, h, n, 0)
}

/// `V_N = S_N / pi(0) - 1`.
pub fn v_n(values: &[f64], filter: &Filter, h: &HurstParam) -> Result<f64> {
    let n = check_len(values, filter)?;
    Ok(s_n(values, filter)? / expected_s_n(filter, h.h(), n) - 1.0)
}

/// `V_N - sqrt(c2) N^(H-1) Z(1)`, with `Z(1)` the last path value.
pub fn adjusted_variation(values: &[f64], filter: &Filter, h: &HurstParam) -> Result<f64> {
    let n = check_len(values, filter)?;
    let v = v_n(values, filter, h)?;
    Ok(v - adjustment(filter, h, n, values[n]))
}

/// The subtracted term `sqrt(c2) N^(H-1) Z(1)`.
pub fn adjustment(filter: &Filter, h: &HurstParam, n: usize, z1: f64) -> f64 {
    analytic::c2(filter, h).sqrt() * (n as f64).powf(h.h() - 1.0) * z1
}

pub fn variation_report(values: &[f64], filter: &Filter, h: Option<&HurstParam>) -> Result<VariationReport> {
    let n = check_len(values, filter)?;
    let s = s_n(values, filter)?;
    let (v, adj) = match h {
        Some(h) => {
            let v = s / expected_s_n(filter, h.h(), n) - 1.0;
            (Some(v), Some(v - adjustment(filter, h, n, values[n])))
        }
        None => (None, None),
    };
    Ok(VariationReport { s_n: s, v_n: v, adjusted: adj, n, filter: filter.id(), h_used: h.map(|h| h.h()) })
}
