//! Scenario files, sweeps and self-checks.

mod config;
mod run;

pub use config::*;
pub use run::*;
