//! File formats, HTTP client and subcommands of the `chartrefine` tool.
//!
//! The pure algorithms live in `chartrefine-core`; this crate adds PNG and
//! JSON IO, TOML configuration, an OpenAI-compatible chat client and parallel
//! batch drivers.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod remote;

pub use error::{CliError, Result};
