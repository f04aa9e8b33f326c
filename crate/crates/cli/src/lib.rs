//! Library side of the `fedpp` command: configuration, workload setup and
//! the three commands, so they can be driven from tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;

pub use commands::{sweep, train, verify};
pub use config::{parse_config, ExperimentConfig};
pub use error::AppError;
