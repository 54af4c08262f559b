//! Scenario runner for the explainable-AI duopoly model: JSON scenario
//! configs in, fixed-schema CSV tables and SVG charts out.

pub mod config;
pub mod plot;
pub mod run;
pub mod table;

pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use run::{run_claims, run_compare, run_render, run_solve, run_sweep, Artifacts, CliError};
