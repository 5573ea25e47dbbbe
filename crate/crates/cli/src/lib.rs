//! Library side of the `socnav` binary: run configuration and the
//! `train` / `plan` / `bench` commands.

pub mod commands;
pub mod config;

pub use config::{Overrides, RunConfig};
