//! Command-line driver: config ingestion, run orchestration and CSV/JSON-lines
//! artifact emission for the `replicator` binary.
//!
//! Exit codes: 0 when every solve converged, 2 when a run finished without
//! converging (outputs are still written), 1 on errors.

pub mod args;
pub mod config;
pub mod run;

pub use args::{Cli, Flags, Sub};
pub use config::{parse_config, parse_config_str, Command, InitChoice, RunConfig};
pub use run::{run, Residual, RunReport, MANIFEST};
