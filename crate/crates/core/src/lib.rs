//! Hurst index estimation for Rosenblatt and fractional Brownian sample paths
//! from filtered quadratic variations.
//!
//! The crate covers filter construction ([`filters`]), closed-form covariance
//! constants ([`analytic`]), series-plus-integral constants ([`quadrature`]),
//! seeded path generators ([`simulate`]), path statistics ([`variation`]), the
//! estimator itself ([`estimator`]) and a Monte Carlo / reporting layer
//! ([`harness`]) used by the `rhurst` command line tool.

pub mod analytic;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod filters;
pub mod harness;
pub mod quadrature;
pub mod simulate;
pub mod variation;

pub use analytic::HurstParam;
pub use error::{Error, Result};
pub use exec::Execution;
pub use filters::Filter;
