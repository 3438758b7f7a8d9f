//! Experiment suites for the `beltrami` crate with JSON and CSV reports.

pub mod config;
pub mod family;
pub mod fit;
pub mod report;
pub mod suites;

pub use config::{ExperimentConfig, Suite};
pub use report::{emit_report, read_report, Check, Report, Series};
pub use suites::run;
