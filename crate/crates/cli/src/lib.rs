//! Library side of the `catbreed` command: configuration, the individual
//! pipeline stages and the JSON report.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{cmd_breed, cmd_quasiprob, cmd_reconstruct, cmd_report, cmd_simulate, pipeline, with_threads};
pub use config::{Overrides, PipelineConfig, StateSpec};
pub use error::{CliError, CliResult};
pub use report::{GenerationRecord, PipelineReport};
