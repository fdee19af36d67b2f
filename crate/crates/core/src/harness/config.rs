//! Experiment configuration from flat `key = value` text.
//!
//! Lists are separated by commas (numbers) or by whitespace / `;` (filter
//! strings, which may themselves contain commas). Blank lines and lines
//! starting with `#` are ignored.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::Filter;
use crate::quadrature::TruncationPolicy;
use crate::simulate::ProcessKind;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub process: ProcessKind,
    pub hurst: Vec<f64>,
    pub n: Vec<usize>,
    pub filters: Vec<String>,
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub workers: usize,
    /// Rosenblatt oversampling `m` at the largest `N` of the grid.
    pub oversample: usize,
    /// Size of the reference `Z(1)` and Gaussian samples for KS comparisons.
    pub reference_samples: usize,
    /// Gaussian summands per reference `Z(1)` draw.
    pub reference_oversample: usize,
    pub out: Option<String>,
    pub policy: TruncationPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            process: ProcessKind::Rosenblatt,
            hurst: vec![0.7],
            n: vec![1 << 10],
            filters: vec!["fd:2".into()],
            replicates: 100,
            seed: 1,
            workers: 0,
            oversample: 16,
            reference_samples: 2000,
            reference_oversample: 1024,
            out: None,
            policy: TruncationPolicy::default(),
        }
    }
}

/// Split `key = value` lines.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| Error::Parse(format!("{key}: '{v}': {e}")))
}

fn num_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

/// Filter strings separated by whitespace or `;`.
pub fn filter_list(v: &str) -> Vec<String> {
    v.split(|c: char| c == ';' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in parse_kv(text)? {
            cfg.apply(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Set one key; the same names are used by the command line flags.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key.replace('-', "_").as_str() {
            "process" => self.process = value.parse()?,
            "hurst" => self.hurst = num_list(key, value)?,
            "n" => self.n = num_list(key, value)?,
            "filters" | "filter" => self.filters = filter_list(value),
            "replicates" => self.replicates = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "oversample" => self.oversample = num(key, value)?,
            "reference_samples" => self.reference_samples = num(key, value)?,
            "reference_oversample" => self.reference_oversample = num(key, value)?,
            "out" => self.out = Some(value.to_string()),
            "kmax" | "k_max" => self.policy.k_max = num(key, value)?,
            "nodes" | "nodes_per_dim" => self.policy.nodes_per_dim = num(key, value)?,
            "rel_tol" => self.policy.rel_tol = num(key, value)?,
            other => return Err(Error::Parse(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<Vec<Filter>> {
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if self.hurst.is_empty() || self.n.is_empty() || self.filters.is_empty() {
            return Err(Error::InvalidParameter("hurst, n and filters must be non-empty".into()));
        }
        for &h in &self.hurst {
            let ok = match self.process {
                ProcessKind::Bm => h == 0.5,
                ProcessKind::Fbm => h > 0.0 && h < 1.0,
                ProcessKind::Rosenblatt => h > 0.5 && h < 1.0,
            };
            if !ok {
                return Err(Error::HurstRange(h));
            }
        }
        let n_max = *self.n.iter().max().expect("non-empty");
        if let Some(bad) = self.n.iter().find(|&&n| n < 4 || n_max % n != 0) {
            return Err(Error::InvalidParameter(format!(
                "every N must be >= 4 and divide the largest N = {n_max}; got {bad}"
            )));
        }
        if self.oversample < 1 || self.reference_oversample < 1 {
            return Err(Error::InvalidParameter("oversampling factors must be >= 1".into()));
        }
        self.policy.validate()?;
        self.filters.iter().map(|s| s.parse::<Filter>()).collect()
    }
}
