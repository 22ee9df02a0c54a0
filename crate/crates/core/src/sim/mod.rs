//! Simulation designs, data generation and Monte Carlo metrics.

pub mod cases;
pub mod generate;
pub mod replicate;

pub use cases::{CaseSpec, ExposureLaw};
pub use generate::{generate_case, generate_rows, BatchSplit};
pub use replicate::{run_replications, replicate_draws, Method, MetricTable, SimOptions};
