//! Command implementations behind the `subtyper` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_cv, cmd_predict, cmd_prep, cmd_report, cmd_train, format_summary};
pub use config::{Manifest, RunConfig};
pub use error::{CliError, CliResult};
