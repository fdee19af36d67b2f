use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("not a filter: coefficients sum to {sum:e} (order 0)")]
    NotAFilter { sum: f64 },

    #[error("filter coefficients are empty or all zero")]
    EmptyFilter,

    #[error("unsupported filter order {order} (supported range {min}..={max})")]
    UnsupportedOrder { order: usize, min: usize, max: usize },

    #[error("invalid filter `{0}` (expected fd:<l>, db:<p> or custom:<c0,c1,...>)")]
    BadFilter(String),

    #[error("Hurst index {0} outside (1/2, 1)")]
    HurstRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel evaluated outside 0 < s < t: t={t}, s={s}")]
    KernelDomain { t: f64, s: f64 },

    #[error("non-finite integrand value at ({}, {}, {}, {})", .at[0], .at[1], .at[2], .at[3])]
    Singularity { at: [f64; 4] },

    #[error("path has {path_len} points, filter of length {filter_len} needs at least {needed}")]
    PathTooShort { path_len: usize, filter_len: usize, needed: usize },

    #[error("degenerate path: quadratic variation is zero")]
    DegeneratePath,

    #[error("no root of the estimating equation in [1/2, 1]; clamped to {clamped}")]
    OutOfRange { clamped: f64 },

    #[error("fGn generation failed: circulant embedding not nonnegative and n = {n} too large for the Cholesky fallback")]
    Generation { n: usize },

    #[error("sample too small for a two-sample KS test: {a} and {b} (need >= {min})")]
    SampleTooSmall { a: usize, b: usize, min: usize },

    #[error("malformed input: {0}")]
    Parse(String),
}
