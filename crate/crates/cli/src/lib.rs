//! Pipeline orchestration for the `rulecircuit` command.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod verify;

pub use config::{RunConfig, ScoringMethod};
pub use pipeline::Pipeline;
