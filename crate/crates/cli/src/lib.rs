//! Command line companion of `slowfast-core`: configuration files, the
//! experiment drivers behind each subcommand and their CSV outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use error::CliError;
