//! Experiment driver for Wassmap: config parsing, the staged pipeline over
//! an experiment directory, and SVG plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod svg;

pub use config::{ExperimentConfig, Method, Settings, Source};
pub use error::{CliError, Result};
pub use experiment::{
    distances, embed, generate, isomap, report, run_all, run_experiment, DistanceSummary, IsomapOutcome, Manifest,
    Report,
};
