//! Command-line laboratory for the coupling in `asip-core`: TOML run
//! configs, subcommands, CSV/JSON/binary artifacts and run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

pub use commands::{run, Command, Outcome};
pub use config::{parse_config, parse_config_str, RunConfig, DEFAULT_SEED};
pub use error::LabError;
pub use manifest::RunManifest;

/// Environment variable capping the worker thread count.
pub const WORKERS_ENV: &str = "ASIP_WORKERS";
