//! Library surface of the `fairdyn` CLI: configuration schema, command
//! implementations, and output formats. The binary in `main.rs` is a thin
//! clap dispatcher over these.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
