//! Files, configuration, threads and the `gsfe` command line around
//! [`gsfe_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod manifest;

pub use error::{CliError, Result};
