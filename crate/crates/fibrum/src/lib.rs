//! Scenario runner and file formats for `fibrum-core`.
//!
//! A scenario is described by a TOML [`ScenarioConfig`]; running it yields a
//! [`VerificationReport`], rendered back to TOML with a fixed layout.

pub mod config;
pub mod report;
pub mod sampling;
pub mod scenarios;

pub use config::{load_config, ConfigError, Scenario, ScenarioConfig};
pub use report::{emit_report, render_report, CheckRow, VerificationReport};
pub use scenarios::run_scenario;
