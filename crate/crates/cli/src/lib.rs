//! Experiment harness: config files, the method x seed x sweep matrix, CSV
//! results and SVG plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;

pub use error::{HarnessError, Result};
