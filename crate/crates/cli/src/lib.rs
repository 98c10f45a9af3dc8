//! Command line, run configuration and file formats on top of
//! `mixeig-core`.
//!
//! Exit codes: 0 success, 1 a check failed or a solve did not converge,
//! 2 invalid configuration or request, 3 I/O error.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use commands::{execute, Outcome};
pub use config::{LoadedConfig, RunConfig, Task};
pub use error::{CliError, CliResult};
