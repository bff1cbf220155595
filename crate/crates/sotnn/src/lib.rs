//! Experiment runner for SOT-MRAM neuromorphic MLPs: configuration, MNIST
//! file loading, checkpoints, reports and the `sotnn` command line.

pub mod checkpoint;
pub mod config;
mod error;
pub mod experiment;
pub mod files;
pub mod report;

pub use error::{CliError, ExitCode};
