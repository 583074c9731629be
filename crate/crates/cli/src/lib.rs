//! Library side of the `unialign` binary: configuration, file formats,
//! manifest, plotting, and the command implementations. The thin `main`
//! parses arguments and dispatches here.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod plot;
