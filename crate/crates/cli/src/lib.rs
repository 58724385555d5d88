//! Scenario runner: simulation, pricing, option valuation and self-checks
//! driven by a JSON scenario file.

pub mod commands;
pub mod config;

pub use commands::{run, CliError, Command, RunOptions};
pub use config::{ConfigError, Scenario, ScenarioConfig};
