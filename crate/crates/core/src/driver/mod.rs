//! Configuration, optimization loop and result files.

pub mod config;
pub mod optimize;
pub mod output;
pub mod problem;

pub use config::ProblemConfig;
pub use optimize::{gradient_check, random_design, run_optimization, run_optimization_from, GradientReport, IterationRecord, RunLog, RunResult};
pub use output::{write_outputs, OutputOptions};
pub use problem::{Evaluation, Problem};
