//! Configuration, orchestration and CSV output for `hybridq` runs.
//!
//! A run is described by a flat TOML document ([`config`]), optionally
//! starting from a named [`presets`] entry, and executed by [`run::run`],
//! which fans the (δ, r) points out over a worker pool and writes one CSV
//! set per run ([`output`]).

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{parse_config, serialize, ConfigError, Mode, RunConfig};
pub use presets::preset;
pub use run::{run, RunError, RunReport};
