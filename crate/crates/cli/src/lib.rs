//! Experiment runner behind the `mimo-noma` binary.

pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;
pub mod validate;
