//! Configuration, stage runner and run manifest for the `causticwave`
//! command-line tool.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{CliError, StageError};
pub use manifest::{Manifest, StageRecord};
pub use stages::{Run, Stage};
