//! Experiment harness: sweeps over `(problem, d, D, δ)`, persistence,
//! aggregation, trend checks and comparison against the reference tables.

pub mod analysis;
pub mod config;
pub mod error;
pub mod reference;
pub mod sweep;

pub use analysis::{
    aggregate, check_trends, compare_reference, emit_plotdata, emit_stats_csv, read_stats_csv, Axis, CellKey,
    CellStats, ComparisonReport, Metric, TrendReport,
};
pub use config::{QuadratureChoice, SweepSpec};
pub use error::{LabError, Result};
pub use reference::{ReferenceRow, ReferenceTable};
pub use sweep::{emit_rows_csv, read_rows, run_job, run_sweep, run_sweep_with, Job, ResultRow, RunSeeds};
