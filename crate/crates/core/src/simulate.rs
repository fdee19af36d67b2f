//! Seeded path generators: fractional Gaussian noise, fractional Brownian
//! motion and Rosenblatt paths.
//!
//! Every generator draws from a ChaCha8 stream keyed by `(seed, stream_id)`.
//! The keystream is a pure function of key, stream and word position, so a
//! replicate's path does not depend on which worker produced it.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic::HurstParam;
use crate::error::{Error, Result};

/// Largest length for which the Levinson-Durbin fallback is attempted.
pub const LEVINSON_MAX: usize = 4096;

/// Independent random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A stream under a different key, for sample families that must not
    /// overlap with the replicate streams of the same seed.
    pub fn derive(&self, salt: u64) -> RngStream {
        RngStream { seed: splitmix64(self.seed ^ splitmix64(salt)), stream_id: self.stream_id }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// fGn autocovariance `(|k+1|^2H - 2|k|^2H + |k-1|^2H) / 2`.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

#[derive(Clone)]
enum Method {
    /// Square roots of the circulant eigenvalues divided by the embedding size.
    Circulant { scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    /// Levinson-Durbin prediction coefficients and innovation deviations.
    Levinson { phi: Vec<Vec<f64>>, sd: Vec<f64> },
}

/// Exact fGn sampler for a fixed `(H, n)`; reusable across replicates.
#[derive(Clone)]
pub struct FgnGenerator {
    h: f64,
    n: usize,
    method: Method,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let method = match self.method {
            Method::Circulant { .. } => "circulant",
            Method::Levinson { .. } => "levinson",
        };
        f.debug_struct("FgnGenerator").field("h", &self.h).field("n", &self.n).field("method", &method).finish()
    }
}

impl FgnGenerator {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::HurstRange(h));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("fGn needs n >= 2, got {n}")));
        }
        let method = match circulant(h, n) {
            Some(m) => m,
            None if n <= LEVINSON_MAX => levinson(h, n),
            None => return Err(Error::Generation { n }),
        };
        Ok(FgnGenerator { h, n, method })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn uses_fallback(&self) -> bool {
        matches!(self.method, Method::Levinson { .. })
    }

    pub fn generate(&self, stream: RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        match &self.method {
            Method::Circulant { scale, fft } => {
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|s| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..self.n].iter().map(|c| c.re).collect()
            }
            Method::Levinson { phi, sd } => {
                let mut x = Vec::with_capacity(self.n);
                for t in 0..self.n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let mean: f64 = phi[t].iter().zip(x.iter().rev()).map(|(p, v)| p * v).sum();
                    x.push(mean + sd[t] * z);
                }
                x
            }
        }
    }
}

// Embed the n x n Toeplitz covariance in a circulant of size 2n.
fn circulant(h: f64, n: usize) -> Option<Method> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| Complex::new(fgn_autocovariance(h, j.min(m - j)), 0.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let mut scale = Vec::with_capacity(m);
    for c in &row {
        let lambda = c.re;
        if lambda < -1e-10 * max {
            return None;
        }
        scale.push((lambda.max(0.0) / m as f64).sqrt());
    }
    Some(Method::Circulant { scale, fft })
}

fn levinson(h: f64, n: usize) -> Method {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(h, k)).collect();
    let mut phi = vec![Vec::new()];
    let mut v = gamma[0];
    let mut sd = vec![v.sqrt()];
    let mut prev: Vec<f64> = Vec::new();
    for t in 1..n {
        let acc: f64 = prev.iter().enumerate().map(|(j, p)| p * gamma[t - 1 - j]).sum();
        let kappa = (gamma[t] - acc) / v;
        let mut next: Vec<f64> = prev.iter().enumerate().map(|(j, p)| p - kappa * prev[t - 2 - j]).collect();
        next.push(kappa);
        v *= 1.0 - kappa * kappa;
        // next[j] multiplies x_(t-1-j)
        phi.push(next.clone());
        sd.push(v.max(0.0).sqrt());
        prev = next;
    }
    Method::Levinson { phi, sd }
}

/// `n` fGn values with unit variance.
pub fn fgn(h: f64, n: usize, stream: RngStream) -> Result<Vec<f64>> {
    Ok(FgnGenerator::new(h, n)?.generate(stream))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Bm,
    Fbm,
    Rosenblatt,
}

impl std::str::FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm" => Ok(ProcessKind::Bm),
            "fbm" => Ok(ProcessKind::Fbm),
            "rosenblatt" => Ok(ProcessKind::Rosenblatt),
            other => Err(Error::Parse(format!("unknown process '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProcessKind::Bm => "bm",
            ProcessKind::Fbm => "fbm",
            ProcessKind::Rosenblatt => "rosenblatt",
        })
    }
}

/// Observations `Z(0), Z(1/N), ..., Z(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub n: usize,
    pub process: ProcessKind,
    pub hurst: f64,
    pub seed: u64,
    pub stream_id: u64,
    pub oversample: usize,
}

impl SamplePath {
    /// Path of unknown provenance, e.g. read from a file.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter("a path needs at least two points".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("path contains non-finite values".into()));
        }
        Ok(SamplePath {
            n: values.len() - 1,
            values,
            process: ProcessKind::Fbm,
            hurst: f64::NAN,
            seed: 0,
            stream_id: 0,
            oversample: 1,
        })
    }

    pub fn last(&self) -> f64 {
        self.values[self.n]
    }

    /// Every `factor`-th point; the result observes the same process on a
    /// coarser grid, with the oversampling multiplied accordingly.
    pub fn subsample(&self, factor: usize) -> Result<SamplePath> {
        if factor == 0 || self.n % factor != 0 {
            return Err(Error::InvalidParameter(format!("cannot subsample N = {} by {factor}", self.n)));
        }
        Ok(SamplePath {
            values: self.values.iter().step_by(factor).copied().collect(),
            n: self.n / factor,
            oversample: self.oversample * factor,
            ..self.clone()
        })
    }

    /// CSV with header `t,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", i as f64 / self.n as f64, v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<SamplePath> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("t,value") => {}
            other => return Err(Error::Parse(format!("expected header 't,value', found {other:?}"))),
        }
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let field = line
                .split(',')
                .nth(1)
                .ok_or_else(|| Error::Parse(format!("row {}: expected two columns", i + 1)))?;
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
            values.push(v);
        }
        SamplePath::from_values(values)
    }
}

fn cumulative(increments: &[f64], scale: f64) -> Vec<f64> {
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for x in increments {
        acc += x;
        values.push(scale * acc);
    }
    values
}

/// fBm on the grid `i/N`: cumulative fGn scaled by `N^-H`. `h = 1/2` gives
/// Brownian motion.
pub fn fbm_path(h: f64, n: usize, stream: RngStream) -> Result<SamplePath> {
    FbmGenerator::new(h, n)?.generate(stream)
}

#[derive(Debug, Clone)]
pub struct FbmGenerator {
    fgn: FgnGenerator,
}

impl FbmGenerator {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        Ok(FbmGenerator { fgn: FgnGenerator::new(h, n)? })
    }

    pub fn generate(&self, stream: RngStream) -> Result<SamplePath> {
        let (h, n) = (self.fgn.h, self.fgn.n);
        let x = self.fgn.generate(stream);
        Ok(SamplePath {
            values: cumulative(&x, (n as f64).powf(-h)),
            n,
            process: if h == 0.5 { ProcessKind::Bm } else { ProcessKind::Fbm },
            hurst: h,
            seed: stream.seed,
            stream_id: stream.stream_id,
            oversample: 1,
        })
    }
}

/// Rosenblatt paths `Z(i/N) = kappa sum_(j <= i m) (X_j^2 - 1)` from fGn
/// `X` of index `H' = (H + 1) / 2`, normalised so `Var Z(1) = 1` exactly.
#[derive(Debug, Clone)]
pub struct RosenblattGenerator {
    h: HurstParam,
    n: usize,
    oversample: usize,
    kappa: f64,
    fgn: FgnGenerator,
}

impl RosenblattGenerator {
    pub fn new(h: &HurstParam, n: usize, oversample: usize) -> Result<Self> {
        if n < 1 || oversample < 1 {
            return Err(Error::InvalidParameter(format!("need N >= 1 and m >= 1, got N = {n}, m = {oversample}")));
        }
        let nm = n
            .checked_mul(oversample)
            .filter(|&nm| nm <= 1 << 26)
            .ok_or_else(|| Error::InvalidParameter(format!("N m = {n} x {oversample} exceeds the memory budget")))?;
        let fgn = FgnGenerator::new(h.h_prime(), nm.max(2))?;
        let mut var = nm as f64;
        for k in 1..nm {
            let g = fgn_autocovariance(h.h_prime(), k);
            var += 2.0 * (nm - k) as f64 * g * g;
        }
        let kappa = 1.0 / (2.0 * var).sqrt();
        Ok(RosenblattGenerator { h: *h, n, oversample, kappa, fgn })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn generate(&self, stream: RngStream) -> SamplePath {
        let x = self.fgn.generate(stream);
        let m = self.oversample;
        let mut values = Vec::with_capacity(self.n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for block in x[..self.n * m].chunks(m) {
            acc += block.iter().map(|v| v * v - 1.0).sum::<f64>();
            values.push(self.kappa * acc);
        }
        SamplePath {
            values,
            n: self.n,
            process: ProcessKind::Rosenblatt,
            hurst: self.h.h(),
            seed: stream.seed,
            stream_id: stream.stream_id,
            oversample: m,
        }
    }
}

pub fn rosenblatt_path(h: &HurstParam, n: usize, oversample: usize, stream: RngStream) -> Result<SamplePath> {
    Ok(RosenblattGenerator::new(h, n, oversample)?.generate(stream))
}

/// A draw approximating the Rosenblatt variable `Z(1)` with `n_internal`
/// Gaussian summands.
pub fn rosenblatt_z1(h: &HurstParam, n_internal: usize, stream: RngStream) -> Result<f64> {
    Ok(rosenblatt_path(h, 1, n_internal, stream)?.last())
}
