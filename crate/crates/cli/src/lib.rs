//! Command-line driver around `pamsim-core`: configuration, parallel
//! replica execution, CSV/JSON/SVG artifacts and run manifests.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod modelfile;
pub mod plot;
pub mod runner;
pub mod tables;

pub use error::{CliError, Result};
