//! Ensemble runs, result files, analysis and plots on top of `lrsd-core`.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod observe;
pub mod plot;
pub mod runner;
pub mod sweep;
pub mod verify;

pub use error::{LabError, Result};
