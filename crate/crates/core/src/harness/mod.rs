//! Simulation, benchmark, coverage and report harness.

pub mod coverage;
pub mod pipeline;
pub mod report;
pub mod signature;
pub mod sim;

pub use coverage::{coverage_experiment, CoverageReport, MethodCoverage};
pub use pipeline::{analyze, calibrate_methods, run_benchmark, BenchConfig, DatasetSource, MethodSpec, ReportBundle};
pub use report::{emit_report, ReportFormat};
pub use sim::{simulate_dataset, SignalRegion, SimConfig, SimulatedDataset};
