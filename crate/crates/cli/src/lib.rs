//! Command-line front end for the `adi-core` pipeline.
//!
//! The `adi` binary is a thin wrapper over [`commands::run`]; the file
//! formats it reads and writes are described in [`formats`].

pub mod bioc;
pub mod commands;
pub mod error;
pub mod formats;

pub use commands::{run, Cli};
pub use error::CliError;
