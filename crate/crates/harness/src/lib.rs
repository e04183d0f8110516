//! Experiment orchestration for the `ocvp` laboratory: configuration with
//! presets and canonical hashing, an append-only run ledger, the staged
//! compare pipeline with resume, report emission, and the command line.

pub mod cli;
pub mod config;
pub mod ledger;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use pipeline::{Flow, Run, RunOptions, Stage};
