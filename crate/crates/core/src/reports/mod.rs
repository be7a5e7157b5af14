//! Scenario ingestion, command orchestration and run artifacts.

pub mod commands;
pub mod output;
pub mod scenario;

pub use commands::{execute, exit_code, run, Command};
pub use output::{Artifacts, Record};
pub use scenario::Scenario;
