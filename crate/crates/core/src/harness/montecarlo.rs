//! Seeded Monte Carlo over `(H, N, filter)` cells.
//!
//! Replicate `r` of Hurst value `H` draws a single path at the largest `N`
//! of the grid from stream `(seed, r)`; smaller `N` observe the same path on
//! a coarser grid. All filters and sample sizes therefore share random
//! numbers, which makes comparisons across `N` much less noisy.

use std::collections::BTreeMap;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::stats::{ks_two_sample, median, summarize, Summary};
use crate::analytic::{self, HurstParam};
use crate::error::{Error, Result};
use crate::estimator;
use crate::exec::{execution_for, map_indexed, with_workers, Execution};
use crate::filters::Filter;
use crate::quadrature::SCHEMA_VERSION;
use crate::simulate::{FbmGenerator, ProcessKind, RngStream, RosenblattGenerator, SamplePath};
use crate::variation;

use rand_distr::{Distribution, StandardNormal};

/// Salt separating the reference-sample streams from the replicate streams.
const REFERENCE_SALT: u64 = 0x5a31_0001;
const GAUSSIAN_SALT: u64 = 0x5a31_0002;

/// Per-replicate statistics of one cell; `None` where not defined.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellSamples {
    /// `h_hat - H` for replicates where estimation succeeded.
    pub h_error: Vec<f64>,
    /// `2 c2(h_hat)^(-1/2) N^(1 - h_hat) log N (h_hat - H)`.
    pub normalized_error: Vec<f64>,
    /// `N^(1-H) V_N / sqrt(c2)`.
    pub v_normalized: Vec<f64>,
    /// `sqrt(N)` times the adjusted variation.
    pub adjusted_sqrt_n: Vec<f64>,
    /// `N^(2H) S_N`.
    pub scaled_s_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsComparison {
    pub vs_rosenblatt: f64,
    pub vs_gaussian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCell {
    pub process: ProcessKind,
    pub h: f64,
    pub n: usize,
    pub filter: String,
    pub replicates: usize,
    /// Replicates whose estimate failed, keyed by error message.
    pub failures: BTreeMap<String, usize>,
    pub h_error: Option<Summary>,
    /// Median of `|h_hat - H| log N`.
    pub abs_error_log_n_median: Option<f64>,
    pub normalized_error: Option<Summary>,
    pub v_normalized: Option<Summary>,
    pub adjusted_sqrt_n: Option<Summary>,
    pub scaled_s_n: Option<Summary>,
    /// `c(H) / 2`, the almost-sure limit of `N^(2H) S_N`.
    pub scaled_s_n_limit: f64,
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_normalized_error: Option<KsComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_v_normalized: Option<KsComparison>,
    #[serde(skip)]
    pub samples: CellSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub schema_version: u32,
    pub seed: u64,
    pub replicates: usize,
    pub oversample: usize,
    pub cells: Vec<McCell>,
}

impl McReport {
    pub fn cell(&self, h: f64, n: usize, filter: &str) -> Option<&McCell> {
        self.cells.iter().find(|c| c.h == h && c.n == n && c.filter == filter)
    }
}

enum PathSource {
    Fbm(FbmGenerator),
    Rosenblatt(RosenblattGenerator),
}

impl PathSource {
    fn new(process: ProcessKind, h: f64, n: usize, oversample: usize) -> Result<Self> {
        Ok(match process {
            ProcessKind::Bm | ProcessKind::Fbm => PathSource::Fbm(FbmGenerator::new(h, n)?),
            ProcessKind::Rosenblatt => {
                PathSource::Rosenblatt(RosenblattGenerator::new(&HurstParam::new(h)?, n, oversample)?)
            }
        })
    }

    fn generate(&self, stream: RngStream) -> Result<SamplePath> {
        match self {
            PathSource::Fbm(g) => g.generate(stream),
            PathSource::Rosenblatt(g) => Ok(g.generate(stream)),
        }
    }
}

/// `count` draws of `Z(1)` and of a standard normal, from streams disjoint
/// from the replicate streams.
pub fn reference_samples(
    h: &HurstParam,
    count: usize,
    n_internal: usize,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = RngStream::new(seed, 0);
    let gen = RosenblattGenerator::new(h, 1, n_internal)?;
    let z1_stream = base.derive(REFERENCE_SALT);
    let z1 = map_indexed(count, exec, |i| gen.generate(RngStream::new(z1_stream.seed, i as u64)).last());
    let mut rng = base.derive(GAUSSIAN_SALT).rng();
    let gauss = (0..count).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok((z1, gauss))
}

// One replicate's statistics, indexed [n][filter].
struct ReplicateStats {
    h_hat: std::result::Result<f64, Error>,
    v_normalized: Option<f64>,
    adjusted_sqrt_n: Option<f64>,
    scaled_s_n: f64,
}

fn replicate(
    path: &SamplePath,
    h: f64,
    hp: Option<&HurstParam>,
    n: usize,
    filter: &Filter,
    c2: Option<f64>,
) -> Result<ReplicateStats> {
    let path = path.subsample(path.n / n)?;
    let s = variation::s_n(&path.values, filter)?;
    let nf = n as f64;
    let (v_normalized, adjusted_sqrt_n) = match (hp, c2) {
        (Some(hp), Some(c2)) => {
            let v = s / variation::expected_s_n(filter, h, n) - 1.0;
            let adj = v - variation::adjustment(filter, hp, n, path.last());
            (Some(nf.powf(1.0 - h) * v / c2.sqrt()), Some(nf.sqrt() * adj))
        }
        _ => (None, None),
    };
    Ok(ReplicateStats {
        h_hat: estimator::solve(filter, n, s).map(|(x, _)| x),
        v_normalized,
        adjusted_sqrt_n,
        scaled_s_n: nf.powf(2.0 * h) * s,
    })
}

/// Run every cell of the configuration. The result depends only on the
/// configuration, never on the worker count.
pub fn run_montecarlo(config: &ExperimentConfig) -> Result<McReport> {
    let filters = config.validate()?;
    with_workers(config.workers, || run_cells(config, &filters))
}

fn run_cells(config: &ExperimentConfig, filters: &[Filter]) -> Result<McReport> {
    let exec = execution_for(config.workers);
    let n_max = *config.n.iter().max().expect("validated");
    let mut n_grid = config.n.clone();
    n_grid.sort_unstable();
    n_grid.dedup();
    let mut cells = Vec::new();
    for &h in &config.hurst {
        let hp = HurstParam::new(h).ok();
        let source = PathSource::new(config.process, h, n_max, config.oversample)?;
        let references = match (&hp, config.process) {
            (Some(hp), _) if config.reference_samples >= super::stats::MIN_KS_SAMPLE => Some(reference_samples(
                hp,
                config.reference_samples,
                config.reference_oversample,
                config.seed,
                exec,
            )?),
            _ => None,
        };
        let c2s: Vec<Option<f64>> = filters.iter().map(|f| hp.as_ref().map(|hp| analytic::c2(f, hp))).collect();
        let runs: Vec<Result<Vec<Vec<Result<ReplicateStats>>>>> = map_indexed(config.replicates, exec, |r| {
            let path = source.generate(RngStream::new(config.seed, r as u64))?;
            Ok(n_grid
                .iter()
                .map(|&n| {
                    filters
                        .iter()
                        .zip(&c2s)
                        .map(|(f, c2)| replicate(&path, h, hp.as_ref(), n, f, *c2))
                        .collect()
                })
                .collect())
        });
        let runs: Vec<Vec<Vec<Result<ReplicateStats>>>> = runs.into_iter().collect::<Result<_>>()?;
        for (ni, &n) in n_grid.iter().enumerate() {
            for (fi, filter) in filters.iter().enumerate() {
                let mut samples = CellSamples::default();
                let mut failures = BTreeMap::new();
                let mut abs_log = Vec::new();
                for run in &runs {
                    let st = match &run[ni][fi] {
                        Ok(st) => st,
                        Err(e) => {
                            *failures.entry(e.to_string()).or_insert(0) += 1;
                            continue;
                        }
                    };
                    samples.scaled_s_n.push(st.scaled_s_n);
                    if let Some(v) = st.v_normalized {
                        samples.v_normalized.push(v);
                    }
                    if let Some(a) = st.adjusted_sqrt_n {
                        samples.adjusted_sqrt_n.push(a);
                    }
                    match &st.h_hat {
                        Ok(hh) => {
                            samples.h_error.push(hh - h);
                            abs_log.push((hh - h).abs() * (n as f64).ln());
                            match estimator::normalized_error_stat(*hh, h, n, filter) {
                                Ok(z) => samples.normalized_error.push(z),
                                Err(e) => *failures.entry(e.to_string()).or_insert(0) += 1,
                            }
                        }
                        Err(e) => *failures.entry(e.to_string()).or_insert(0) += 1,
                    }
                }
                let ks = |x: &[f64]| -> Option<KsComparison> {
                    let (z1, gauss) = references.as_ref()?;
                    Some(KsComparison {
                        vs_rosenblatt: ks_two_sample(x, z1).ok()?,
                        vs_gaussian: ks_two_sample(x, gauss).ok()?,
                    })
                };
                cells.push(McCell {
                    process: config.process,
                    h,
                    n,
                    filter: filter.id(),
                    replicates: config.replicates,
                    failures,
                    h_error: summarize(&samples.h_error),
                    abs_error_log_n_median: (!abs_log.is_empty()).then(|| median(&abs_log)),
                    normalized_error: summarize(&samples.normalized_error),
                    v_normalized: summarize(&samples.v_normalized),
                    adjusted_sqrt_n: summarize(&samples.adjusted_sqrt_n),
                    scaled_s_n: summarize(&samples.scaled_s_n),
                    scaled_s_n_limit: 0.5 * analytic::c_of_h(filter, h),
                    c2: c2s[fi],
                    ks_normalized_error: ks(&samples.normalized_error),
                    ks_v_normalized: ks(&samples.v_normalized),
                    samples,
                });
            }
        }
    }
    Ok(McReport {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        replicates: config.replicates,
        oversample: config.oversample,
        cells,
    })
}
