//! Benchmark harness: MNIST ingestion, pixel-grid costs and experiment
//! runs that log convergence traces.

mod error;
pub mod experiment;
pub mod grid;
pub mod idx;

pub use error::{BenchError, Result};
pub use experiment::{run_experiment, run_one, ExperimentConfig, Instance, RunSpec, RunSummary};
pub use grid::grid_cost;
pub use idx::{load_idx, ImageMeasure, ImageSelector};
