//! Standard-error tables over filter order, kind and `H`.

use serde::Serialize;

use crate::analytic::HurstParam;
use crate::error::{Error, Result};
use crate::estimator;
use crate::exec::{execution_for, map_indexed, with_workers};
use crate::filters::{Filter, FilterKind};
use crate::simulate::{RngStream, RosenblattGenerator};

/// Which `H` the standard error is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeAt {
    /// The grid value; deterministic.
    True,
    /// The estimate from one simulated Rosenblatt path per `H`.
    Estimated,
}

impl std::str::FromStr for SeAt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(SeAt::True),
            "estimated" => Ok(SeAt::Estimated),
            other => Err(Error::Parse(format!("--se-at expects 'true' or 'estimated', got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureConfig {
    pub n: usize,
    pub min_order: usize,
    pub max_order: usize,
    pub hurst: Vec<f64>,
    pub se_at: SeAt,
    pub seed: u64,
    pub oversample: usize,
    pub workers: usize,
}

impl Default for FigureConfig {
    fn default() -> Self {
        FigureConfig {
            n: 10_000,
            min_order: 2,
            max_order: 20,
            hurst: (0..9).map(|i| 0.55 + 0.05 * i as f64).map(|h| (h * 100.0).round() / 100.0).collect(),
            se_at: SeAt::True,
            seed: 1,
            oversample: 16,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub filter_kind: FilterKind,
    pub order: usize,
    #[serde(rename = "H")]
    pub h: f64,
    /// `H` used in the standard error (the grid value or its estimate).
    pub h_used: f64,
    pub std_err: f64,
}

/// `fd:p` or `db:p`, the order-`p` member of each family.
pub fn filter_of_order(kind: FilterKind, order: usize) -> Result<Filter> {
    match kind {
        FilterKind::FiniteDifference => Filter::finite_difference(order),
        FilterKind::Daubechies => Filter::daubechies(order),
        FilterKind::Custom => Err(Error::InvalidParameter("custom filters have no order family".into())),
    }
}

pub fn figure_table(cfg: &FigureConfig) -> Result<Vec<FigureRow>> {
    if cfg.min_order < 2 || cfg.max_order < cfg.min_order {
        return Err(Error::InvalidParameter(format!("bad order range {}..={}", cfg.min_order, cfg.max_order)));
    }
    let kinds = [FilterKind::FiniteDifference, FilterKind::Daubechies];
    let filters: Vec<(FilterKind, usize, Filter)> = kinds
        .iter()
        .flat_map(|&k| (cfg.min_order..=cfg.max_order).map(move |p| (k, p)))
        .map(|(k, p)| filter_of_order(k, p).map(|f| (k, p, f)))
        .collect::<Result<_>>()?;
    // One path per H, shared by every filter in estimated mode.
    let paths = match cfg.se_at {
        SeAt::True => None,
        SeAt::Estimated => Some(with_workers(cfg.workers, || {
            map_indexed(cfg.hurst.len(), execution_for(cfg.workers), |i| {
                let hp = HurstParam::new(cfg.hurst[i])?;
                Ok(RosenblattGenerator::new(&hp, cfg.n, cfg.oversample)?.generate(RngStream::new(cfg.seed, i as u64)))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()
        })?),
    };
    let mut rows = Vec::new();
    for (kind, order, filter) in &filters {
        for (i, &h) in cfg.hurst.iter().enumerate() {
            let h_used = match &paths {
                None => h,
                Some(p) => match estimator::estimate_hurst(&p[i].values, filter) {
                    Ok(r) => r.h_hat,
                    Err(Error::OutOfRange { clamped }) => clamped,
                    Err(e) => return Err(e),
                },
            };
            let std_err = estimator::standard_error(h_used, cfg.n, filter).unwrap_or(f64::NAN);
            rows.push(FigureRow { filter_kind: *kind, order: *order, h, h_used, std_err });
        }
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[FigureRow]) -> String {
    let mut out = String::from("filter_kind,order,H,h_used,std_err\n");
    for r in rows {
        let kind = match r.filter_kind {
            FilterKind::FiniteDifference => "finite_difference",
            FilterKind::Daubechies => "daubechies",
            FilterKind::Custom => "custom",
        };
        out.push_str(&format!("{kind},{},{},{:.16e},{:.16e}\n", r.order, r.h, r.h_used, r.std_err));
    }
    out
}

/// Standard errors of one family at one `H`, in increasing order.
pub fn series(rows: &[FigureRow], kind: FilterKind, h: f64) -> Vec<(usize, f64)> {
    let mut s: Vec<(usize, f64)> =
        rows.iter().filter(|r| r.filter_kind == kind && r.h == h).map(|r| (r.order, r.std_err)).collect();
    s.sort_by_key(|x| x.0);
    s
}

/// First order from which every further step changes the standard error by
/// less than `rel` (relative).
pub fn plateau_order(series: &[(usize, f64)], rel: f64) -> Option<usize> {
    let mut start = None;
    for w in series.windows(2) {
        let change = ((w[1].1 - w[0].1) / w[0].1).abs();
        if change < rel {
            start.get_or_insert(w[0].0);
        } else {
            start = None;
        }
    }
    start
}

/// Smallest order `p*` such that the second family is strictly below the
/// first at `p*` and every larger order.
pub fn crossover_order(first: &[(usize, f64)], second: &[(usize, f64)]) -> Option<usize> {
    let mut p_star = None;
    for ((p, a), (_, b)) in first.iter().zip(second) {
        if b < a {
            p_star.get_or_insert(*p);
        } else {
            p_star = None;
        }
    }
    p_star
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape_and_csv() {
        let cfg = FigureConfig { max_order: 4, hurst: vec![0.6, 0.8], ..Default::default() };
        let rows = figure_table(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("filter_kind,order,H,h_used,std_err\n"));
        assert_eq!(csv.lines().count(), 13);
        let fd = series(&rows, FilterKind::FiniteDifference, 0.6);
        assert_eq!(fd.iter().map(|x| x.0).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn crossover_and_plateau_helpers() {
        let a = [(2, 1.0), (3, 0.9), (4, 0.89), (5, 0.889)];
        let b = [(2, 1.2), (3, 0.95), (4, 0.85), (5, 0.80)];
        assert_eq!(crossover_order(&a, &b), Some(4));
        assert_eq!(crossover_order(&b, &a), None);
        assert_eq!(plateau_order(&a, 0.02), Some(3));
    }

    #[test]
    fn estimated_mode_is_deterministic() {
        let cfg = FigureConfig {
            n: 512,
            max_order: 3,
            hurst: vec![0.7],
            se_at: SeAt::Estimated,
            oversample: 4,
            ..Default::default()
        };
        assert_eq!(figure_table(&cfg).unwrap(), figure_table(&FigureConfig { workers: 1, ..cfg.clone() }).unwrap());
    }
}
