//! File formats, experiment orchestration and the `scenvec` command line on
//! top of `scenvec-core`.
//!
//! - [`dataset`]: JSON Lines scene files, training mixes and splits
//! - [`config`]: the experiment configuration file
//! - [`experiment`]: parallel generation, mix training and evaluation, tree baseline
//! - [`checkpoint`]: predictor checkpoints with a shape manifest
//! - [`report`]: CSV row files and Markdown tables
//! - [`plot`]: SVG scene drawings
//! - [`cli`]: the command-line front end

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod json;
pub mod plot;
pub mod report;
