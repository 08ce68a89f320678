//! Configuration, presets, and batch runs writing CSV patterns and JSON reports.

pub mod config;
pub mod io;
pub mod run;

pub use config::{load_config, parse_config, preset_source, ExperimentConfig, Mode, PRESET_NAMES};
pub use run::{exit_code, run, RunOutput};
