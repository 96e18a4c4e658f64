//! Batch frontend for `bayeskern`: TOML config plus CSV data in, CSV tables out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use commands::{run_command, Command, Overrides};
pub use config::{LoadedConfig, RunConfig};
pub use error::{CliError, Result};
pub use table::{ingest_csv, TableOutput};
