//! Benchmark harness for rmb-cle: cross-validated grid search, repeated
//! train/test runs, metrics, cluster stability and rank tables.

pub mod benchmark;
pub mod cv;
pub mod error;
pub mod methods;
pub mod metrics;
pub mod ranks;
pub mod stability;

pub use benchmark::{run_benchmark, write_report, BenchmarkReport, ExperimentConfig, RunRecord};
pub use error::{Error, Result};
pub use methods::{BlockSizes, FitContext, Fitted, Grid, Grids, Method};
