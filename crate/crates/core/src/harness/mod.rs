//! Experiment configuration, Monte Carlo runner, standard-error tables and
//! summary statistics used by the `rhurst` tool.

pub mod config;
pub mod figures;
pub mod montecarlo;
pub mod stats;

pub use config::ExperimentConfig;
pub use figures::{figure_table, FigureConfig, FigureRow, SeAt};
pub use montecarlo::{run_montecarlo, McCell, McReport};
pub use stats::{ks_two_sample, summarize, Summary};
