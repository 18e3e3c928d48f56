//! Scenario runner for the `safeqp` controllers: JSON scenario configs in,
//! one trajectory CSV per run and one summary JSON per scenario out.

pub mod builtin;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use builtin::{builtin, builtin_scenarios, BUILTIN};
pub use config::{
    parse_config, parse_config_str, to_config_json, MethodSpec, PlantSpec, RunPlan, ScenarioSpec,
};
pub use error::{CliError, Result};
pub use output::{write_summary, write_trajectory_csv, RunRecord, SummaryReport};
pub use runner::run_scenario;
