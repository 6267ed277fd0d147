//! Scenario runner for `magdirac-core`.
//!
//! A scenario is a single TOML file naming the field, the transverse backend,
//! an optional potential and a list of analyses. [`run_scenario`] executes the
//! analyses in dependency order on a bounded thread pool and collects a
//! [`RunReport`]; [`emit_report`] writes it as JSON, CSV tables and plot data.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{Analysis, ScenarioConfig};
pub use error::CliError;
pub use report::{emit_report, load_report};
pub use runner::{run_scenario, RunReport, Status};
