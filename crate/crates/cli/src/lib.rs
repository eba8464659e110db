//! Command-line front end for the cruise simulator: TOML configuration,
//! subcommand drivers and the CSV/JSON output formats.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_campaign, cmd_plan, cmd_simulate, cmd_validate, CliError};
pub use config::{load_config, parse_config, ConfigError, RunConfig};
