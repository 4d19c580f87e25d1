//! Batch front end: JSON configs, CSV/JSON outputs, and a disk cache for moment tables.

pub mod cache;
pub mod config;
pub mod emit;
pub mod run;

pub use cache::DiskStore;
pub use config::{parse_config, Command, ConfigError, Format, RunConfig};
pub use run::{execute, write_output, Outcome, RunError};
